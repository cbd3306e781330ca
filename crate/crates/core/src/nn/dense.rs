use super::tensor::ensure_finite;
use super::{Activation, NnError, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `units x input_dim`
    pub weight: Tensor,
    /// `units`
    pub bias: Tensor,
}

impl DenseParams {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self, NnError> {
        weight.expect_rank(2, "dense weight")?;
        bias.expect_shape(&[weight.shape()[0]], "dense bias")?;
        Ok(Self { weight, bias })
    }

    pub fn units(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: self.weight.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }
}

fn check_input(input: &[f64], params: &DenseParams) -> Result<(), NnError> {
    if input.len() != params.input_dim() {
        return Err(NnError::ShapeMismatch(format!(
            "dense expects {} inputs, got {}",
            params.input_dim(),
            input.len()
        )));
    }
    Ok(())
}

/// `act(W x + b)`
pub fn dense_forward(input: &[f64], params: &DenseParams, activation: Activation) -> Result<Vec<f64>, NnError> {
    check_input(input, params)?;
    let mut out: Vec<f64> = params
        .weight
        .data()
        .chunks_exact(params.input_dim())
        .zip(params.bias.data())
        .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
        .collect();
    activation.apply_in_place(&mut out);
    Ok(out)
}

pub fn dense_backward(
    input: &[f64],
    params: &DenseParams,
    activation: Activation,
    output: &[f64],
    upstream: &[f64],
) -> Result<(Vec<f64>, DenseParams), NnError> {
    check_input(input, params)?;
    if output.len() != params.units() || upstream.len() != params.units() {
        return Err(NnError::ShapeMismatch(format!(
            "dense backward expects {} outputs, got {} / {}",
            params.units(),
            output.len(),
            upstream.len()
        )));
    }
    let mut grad = upstream.to_vec();
    activation.backprop(output, &mut grad);
    let dim = params.input_dim();
    let mut grads = params.zeros_like();
    let mut grad_input = vec![0.0; dim];
    for (u, (&g, row)) in grad.iter().zip(params.weight.data().chunks_exact(dim)).enumerate() {
        let gw = &mut grads.weight.data_mut()[u * dim..(u + 1) * dim];
        for ((d, &x), (gi, &w)) in gw.iter_mut().zip(input).zip(grad_input.iter_mut().zip(row)) {
            *d = g * x;
            *gi += g * w;
        }
    }
    grads.bias.data_mut().copy_from_slice(&grad);
    Ok((grad_input, grads))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, NnError> {
    if logits.len() < 2 {
        return Err(NnError::ShapeMismatch(format!(
            "softmax needs at least 2 logits, got {}",
            logits.len()
        )));
    }
    ensure_finite(logits, "softmax logits")?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}
