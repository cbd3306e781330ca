use super::{NnError, Tensor};

/// Non-overlapping max pooling over the last axis of a `C x L` tensor.
///
/// Returns the pooled tensor and, per output cell, the flat input index of
/// the maximum (earliest on ties). Trailing `L % pool` columns are dropped.
pub fn maxpool1d(input: &Tensor, pool: usize) -> Result<(Tensor, Vec<usize>), NnError> {
    input.expect_rank(2, "maxpool input")?;
    let (channels, len) = (input.shape()[0], input.shape()[1]);
    if pool == 0 || len < pool {
        return Err(NnError::TooShort { len, pool });
    }
    let out_len = len / pool;
    let x = input.data();
    let mut out = Vec::with_capacity(channels * out_len);
    let mut argmax = Vec::with_capacity(channels * out_len);
    for c in 0..channels {
        for j in 0..out_len {
            let start = c * len + j * pool;
            let mut best = start;
            for i in start + 1..start + pool {
                if x[i] > x[best] {
                    best = i;
                }
            }
            out.push(x[best]);
            argmax.push(best);
        }
    }
    Ok((Tensor::new(vec![channels, out_len], out)?, argmax))
}

/// Routes each upstream gradient to its recorded argmax position.
pub fn maxpool1d_backward(
    input_shape: &[usize],
    argmax: &[usize],
    upstream: &Tensor,
) -> Result<Tensor, NnError> {
    if upstream.len() != argmax.len() {
        return Err(NnError::ShapeMismatch(format!(
            "maxpool upstream has {} values for {} pooled cells",
            upstream.len(),
            argmax.len()
        )));
    }
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (&idx, &u) in argmax.iter().zip(upstream.data()) {
        g[idx] += u;
    }
    Ok(grad)
}
