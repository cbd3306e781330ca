//! Stride-1 same-padded 1-D convolution.
//!
//! Padding is `(K - 1) / 2` zeros on the left and the remainder on the
//! right, so even kernels get the extra zero on the right.

use super::{Activation, NnError, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `out_channels x in_channels x kernel_size`
    pub weight: Tensor,
    /// `out_channels`
    pub bias: Tensor,
}

impl ConvParams {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self, NnError> {
        weight.expect_rank(3, "conv weight")?;
        bias.expect_shape(&[weight.shape()[0]], "conv bias")?;
        Ok(Self { weight, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: self.weight.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }
}

/// Output index range `[t0, t1)` whose tap `k` lands inside the input.
#[inline]
fn valid_range(len: usize, k: usize, pad_left: usize) -> (usize, usize) {
    let t0 = pad_left.saturating_sub(k).min(len);
    let t1 = (len + pad_left).saturating_sub(k).min(len);
    (t0, t1.max(t0))
}

fn check_input(input: &Tensor, params: &ConvParams) -> Result<usize, NnError> {
    input.expect_rank(2, "conv input")?;
    if input.shape()[0] != params.in_channels() {
        return Err(NnError::ShapeMismatch(format!(
            "conv expects {} input channels, got {}",
            params.in_channels(),
            input.shape()[0]
        )));
    }
    Ok(input.shape()[1])
}

/// `out[o][t] = act(bias[o] + sum_{c,k} w[o][c][k] * x_pad[c][t + k])`
pub fn conv1d_same_forward(
    input: &Tensor,
    params: &ConvParams,
    activation: Activation,
) -> Result<Tensor, NnError> {
    let len = check_input(input, params)?;
    let (out_ch, in_ch, kernel) = (params.out_channels(), params.in_channels(), params.kernel_size());
    let pad_left = (kernel - 1) / 2;
    let x = input.data();
    let w = params.weight.data();
    let mut out = vec![0.0; out_ch * len];
    for (o, row) in out.chunks_exact_mut(len).enumerate() {
        row.fill(params.bias.data()[o]);
        for c in 0..in_ch {
            let xc = &x[c * len..(c + 1) * len];
            let wk = &w[(o * in_ch + c) * kernel..(o * in_ch + c + 1) * kernel];
            for (k, &wv) in wk.iter().enumerate() {
                let (t0, t1) = valid_range(len, k, pad_left);
                if t0 == t1 {
                    continue;
                }
                let src = &xc[t0 + k - pad_left..t1 + k - pad_left];
                for (y, &xv) in row[t0..t1].iter_mut().zip(src) {
                    *y += wv * xv;
                }
            }
        }
    }
    activation.apply_in_place(&mut out);
    Tensor::new(vec![out_ch, len], out)
}

/// Gradients of a scalar loss through [`conv1d_same_forward`].
///
/// `output` is the forward result (post-activation). The input gradient is
/// skipped when `need_input_grad` is false and returned as `None`.
pub fn conv1d_same_backward(
    input: &Tensor,
    params: &ConvParams,
    activation: Activation,
    output: &Tensor,
    upstream: &Tensor,
    need_input_grad: bool,
) -> Result<(Option<Tensor>, ConvParams), NnError> {
    let len = check_input(input, params)?;
    let (out_ch, in_ch, kernel) = (params.out_channels(), params.in_channels(), params.kernel_size());
    output.expect_shape(&[out_ch, len], "conv output")?;
    upstream.expect_shape(&[out_ch, len], "conv upstream gradient")?;
    let pad_left = (kernel - 1) / 2;

    let mut grad = upstream.data().to_vec();
    activation.backprop(output.data(), &mut grad);

    let x = input.data();
    let w = params.weight.data();
    let mut grads = params.zeros_like();
    let mut grad_x = if need_input_grad { vec![0.0; in_ch * len] } else { Vec::new() };
    {
        let gw = grads.weight.data_mut();
        for (o, g) in grad.chunks_exact(len).enumerate() {
            for c in 0..in_ch {
                let xc = &x[c * len..(c + 1) * len];
                let base = (o * in_ch + c) * kernel;
                for k in 0..kernel {
                    let (t0, t1) = valid_range(len, k, pad_left);
                    if t0 == t1 {
                        continue;
                    }
                    let src = &xc[t0 + k - pad_left..t1 + k - pad_left];
                    gw[base + k] += g[t0..t1].iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                    if need_input_grad {
                        let wv = w[base + k];
                        let dst = &mut grad_x[c * len + t0 + k - pad_left..c * len + t1 + k - pad_left];
                        for (d, &gv) in dst.iter_mut().zip(&g[t0..t1]) {
                            *d += wv * gv;
                        }
                    }
                }
            }
        }
    }
    for (b, g) in grads.bias.data_mut().iter_mut().zip(grad.chunks_exact(len)) {
        *b = g.iter().sum();
    }
    let grad_input = if need_input_grad {
        Some(Tensor::new(vec![in_ch, len], grad_x)?)
    } else {
        None
    };
    Ok((grad_input, grads))
}
