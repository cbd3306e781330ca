//! Single-layer LSTM returning the final hidden state.
//!
//! Gate rows are stacked as input, forget, cell, output:
//! `z = W_x (x_t * m_x) + W_h (h_{t-1} * m_h) + b`, `c_t = f c_{t-1} + i g`,
//! `h_t = o tanh(c_t)`. Dropout masks `m_x` and `m_h` are drawn once per
//! sequence and shared by every step.

use super::activation::sigmoid;
use super::dropout::dropout_mask;
use super::{NnError, Rng, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H x D`
    pub w_input: Tensor,
    /// `4H x H`
    pub w_recurrent: Tensor,
    /// `4H`
    pub bias: Tensor,
}

impl LstmParams {
    pub fn new(w_input: Tensor, w_recurrent: Tensor, bias: Tensor) -> Result<Self, NnError> {
        w_input.expect_rank(2, "lstm input kernel")?;
        let rows = w_input.shape()[0];
        if !rows.is_multiple_of(4) {
            return Err(NnError::ShapeMismatch(format!(
                "lstm input kernel has {rows} rows, not a multiple of 4"
            )));
        }
        w_recurrent.expect_shape(&[rows, rows / 4], "lstm recurrent kernel")?;
        bias.expect_shape(&[rows], "lstm bias")?;
        Ok(Self {
            w_input,
            w_recurrent,
            bias,
        })
    }

    pub fn units(&self) -> usize {
        self.w_recurrent.shape()[1]
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.shape()[1]
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w_input: self.w_input.zeros_like(),
            w_recurrent: self.w_recurrent.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutRates {
    pub input: f64,
    pub recurrent: f64,
}

impl DropoutRates {
    pub const NONE: Self = Self {
        input: 0.0,
        recurrent: 0.0,
    };
}

/// Per-sequence multiplicative masks, already scaled by the keep probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmMasks {
    pub input: Vec<f64>,
    pub recurrent: Vec<f64>,
}

impl LstmMasks {
    pub fn identity(input_dim: usize, units: usize) -> Self {
        Self {
            input: vec![1.0; input_dim],
            recurrent: vec![1.0; units],
        }
    }

    pub fn sample(input_dim: usize, units: usize, rates: DropoutRates, rng: &mut Rng) -> Result<Self, NnError> {
        Ok(Self {
            input: dropout_mask(input_dim, rates.input, rng)?,
            recurrent: dropout_mask(units, rates.recurrent, rng)?,
        })
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    x_masked: Vec<f64>,
    h_prev_masked: Vec<f64>,
    /// activated gates `[i, f, g, o]`
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    pub masks: LstmMasks,
    steps: Vec<StepCache>,
}

fn matvec_add(out: &mut [f64], matrix: &[f64], cols: usize, v: &[f64]) {
    for (o, row) in out.iter_mut().zip(matrix.chunks_exact(cols)) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

fn check_sequence(seq: &Tensor, params: &LstmParams) -> Result<usize, NnError> {
    seq.expect_rank(2, "lstm sequence")?;
    if seq.shape()[1] != params.input_dim() {
        return Err(NnError::ShapeMismatch(format!(
            "lstm expects {} features per step, got {}",
            params.input_dim(),
            seq.shape()[1]
        )));
    }
    Ok(seq.shape()[0])
}

/// Runs the recurrence, sampling dropout masks only when `training`.
pub fn lstm_forward(
    seq: &Tensor,
    params: &LstmParams,
    rates: DropoutRates,
    training: bool,
    rng: &mut Rng,
) -> Result<(Vec<f64>, LstmCache), NnError> {
    let masks = if training {
        LstmMasks::sample(params.input_dim(), params.units(), rates, rng)?
    } else {
        LstmMasks::identity(params.input_dim(), params.units())
    };
    lstm_forward_with_masks(seq, params, masks)
}

pub fn lstm_forward_with_masks(
    seq: &Tensor,
    params: &LstmParams,
    masks: LstmMasks,
) -> Result<(Vec<f64>, LstmCache), NnError> {
    let steps_len = check_sequence(seq, params)?;
    let (d, h) = (params.input_dim(), params.units());
    if masks.input.len() != d || masks.recurrent.len() != h {
        return Err(NnError::ShapeMismatch("lstm dropout masks do not match layer".into()));
    }
    let mut h_t = vec![0.0; h];
    let mut c_t = vec![0.0; h];
    let mut steps = Vec::with_capacity(steps_len);
    for x in seq.data().chunks_exact(d) {
        let x_masked: Vec<f64> = x.iter().zip(&masks.input).map(|(a, m)| a * m).collect();
        let h_prev_masked: Vec<f64> = h_t.iter().zip(&masks.recurrent).map(|(a, m)| a * m).collect();
        let mut z = params.bias.data().to_vec();
        matvec_add(&mut z, params.w_input.data(), d, &x_masked);
        matvec_add(&mut z, params.w_recurrent.data(), h, &h_prev_masked);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&k) { v.tanh() } else { sigmoid(*v) };
        }
        let c_prev = c_t.clone();
        let mut tanh_c = vec![0.0; h];
        for j in 0..h {
            let (i, f, g, o) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
            c_t[j] = f * c_prev[j] + i * g;
            tanh_c[j] = c_t[j].tanh();
            h_t[j] = o * tanh_c[j];
        }
        steps.push(StepCache {
            x_masked,
            h_prev_masked,
            gates: z,
            c_prev,
            tanh_c,
        });
    }
    Ok((h_t, LstmCache { masks, steps }))
}

/// Backpropagation through time from a gradient on the final hidden state.
pub fn lstm_backward(
    seq: &Tensor,
    params: &LstmParams,
    cache: &LstmCache,
    upstream: &[f64],
) -> Result<(Tensor, LstmParams), NnError> {
    let steps_len = check_sequence(seq, params)?;
    let (d, h) = (params.input_dim(), params.units());
    if upstream.len() != h || cache.steps.len() != steps_len {
        return Err(NnError::ShapeMismatch(format!(
            "lstm backward: upstream {} for {h} units, cache {} steps for {steps_len}",
            upstream.len(),
            cache.steps.len()
        )));
    }
    let mut grads = params.zeros_like();
    let mut grad_seq = vec![0.0; steps_len * d];
    let mut dh = upstream.to_vec();
    let mut dc = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    let w_in = params.w_input.data();
    let w_rec = params.w_recurrent.data();

    for (t, step) in cache.steps.iter().enumerate().rev() {
        let gates = &step.gates;
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = step.tanh_c[j];
            let d_o = dh[j] * tc;
            dc[j] += dh[j] * o * (1.0 - tc * tc);
            let d_i = dc[j] * g;
            let d_g = dc[j] * i;
            let d_f = dc[j] * step.c_prev[j];
            dz[j] = d_i * i * (1.0 - i);
            dz[h + j] = d_f * f * (1.0 - f);
            dz[2 * h + j] = d_g * (1.0 - g * g);
            dz[3 * h + j] = d_o * o * (1.0 - o);
            dc[j] *= f;
        }

        let gx = &mut grad_seq[t * d..(t + 1) * d];
        let mut dh_masked = vec![0.0; h];
        {
            let gw_in = grads.w_input.data_mut();
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr == 0.0 {
                    continue;
                }
                let row = &w_in[r * d..(r + 1) * d];
                let grow = &mut gw_in[r * d..(r + 1) * d];
                for ((gw, &x), (gi, &w)) in grow.iter_mut().zip(&step.x_masked).zip(gx.iter_mut().zip(row)) {
                    *gw += dzr * x;
                    *gi += dzr * w;
                }
            }
        }
        {
            let gw_rec = grads.w_recurrent.data_mut();
            for (r, &dzr) in dz.iter().enumerate() {
                let row = &w_rec[r * h..(r + 1) * h];
                let grow = &mut gw_rec[r * h..(r + 1) * h];
                for ((gw, &hp), (dhm, &w)) in grow.iter_mut().zip(&step.h_prev_masked).zip(dh_masked.iter_mut().zip(row)) {
                    *gw += dzr * hp;
                    *dhm += dzr * w;
                }
            }
        }
        for (b, &dzr) in grads.bias.data_mut().iter_mut().zip(&dz) {
            *b += dzr;
        }
        for (g, m) in gx.iter_mut().zip(&cache.masks.input) {
            *g *= m;
        }
        for ((dhj, dm), m) in dh.iter_mut().zip(dh_masked).zip(&cache.masks.recurrent) {
            *dhj = dm * m;
        }
    }
    Ok((Tensor::new(vec![steps_len, d], grad_seq)?, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, numeric_gradient};

    fn random(shape: &[usize], rng: &mut Rng, scale: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform(-scale, scale)).collect()).unwrap()
    }

    fn random_params(d: usize, h: usize, rng: &mut Rng) -> LstmParams {
        LstmParams::new(
            random(&[4 * h, d], rng, 0.8),
            random(&[4 * h, h], rng, 0.8),
            random(&[4 * h], rng, 0.3),
        )
        .unwrap()
    }

    /// Step-by-step recurrence written gate by gate with explicit index loops.
    fn oracle(seq: &[Vec<f64>], p: &LstmParams) -> Vec<f64> {
        let (d, h) = (p.input_dim(), p.units());
        let wx = |r: usize, c: usize| p.w_input.data()[r * d + c];
        let wh = |r: usize, c: usize| p.w_recurrent.data()[r * h + c];
        let b = p.bias.data();
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut hs = vec![0.0; h];
        let mut cs = vec![0.0; h];
        for x in seq {
            let pre = |gate: usize, j: usize, hs: &[f64]| {
                let r = gate * h + j;
                let mut s = b[r];
                for c in 0..d {
                    s += wx(r, c) * x[c];
                }
                for c in 0..h {
                    s += wh(r, c) * hs[c];
                }
                s
            };
            let mut nh = vec![0.0; h];
            for j in 0..h {
                let i = sig(pre(0, j, &hs));
                let f = sig(pre(1, j, &hs));
                let g = pre(2, j, &hs).tanh();
                let o = sig(pre(3, j, &hs));
                cs[j] = f * cs[j] + i * g;
                nh[j] = o * cs[j].tanh();
            }
            hs = nh;
        }
        hs
    }

    #[test]
    fn zero_weights_zero_state() {
        let p = LstmParams::new(Tensor::zeros(&[8, 3]), Tensor::zeros(&[8, 2]), Tensor::zeros(&[8])).unwrap();
        let seq = Tensor::new(vec![4, 3], (0..12).map(|v| v as f64).collect()).unwrap();
        let (h, _) = lstm_forward_with_masks(&seq, &p, LstmMasks::identity(3, 2)).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
    }

    #[test]
    fn single_step_closed_form() {
        // H = 1, D = 1, zero recurrent kernel and bias.
        let (wi, wf, wg, wo) = (0.3, -0.2, 0.5, 0.7);
        let x = 0.9;
        let p = LstmParams::new(
            Tensor::new(vec![4, 1], vec![wi, wf, wg, wo]).unwrap(),
            Tensor::zeros(&[4, 1]),
            Tensor::zeros(&[4]),
        )
        .unwrap();
        let (h, _) = lstm_forward_with_masks(&Tensor::new(vec![1, 1], vec![x]).unwrap(), &p, LstmMasks::identity(1, 1)).unwrap();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let expected = sig(wo * x) * (sig(wi * x) * (wg * x).tanh()).tanh();
        assert!((h[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn matches_recurrence_oracle() {
        let mut rng = Rng::new(31);
        let p = random_params(2, 2, &mut rng);
        let seq = random(&[3, 2], &mut rng, 1.0);
        let rows: Vec<Vec<f64>> = seq.data().chunks(2).map(|r| r.to_vec()).collect();
        let (h, _) = lstm_forward_with_masks(&seq, &p, LstmMasks::identity(2, 2)).unwrap();
        for (a, b) in h.iter().zip(oracle(&rows, &p)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inference_ignores_dropout() {
        let mut rng = Rng::new(1);
        let p = random_params(3, 2, &mut rng);
        let seq = random(&[3, 3], &mut rng, 1.0);
        let rates = DropoutRates { input: 0.1, recurrent: 0.5 };
        let (a, _) = lstm_forward(&seq, &p, rates, false, &mut Rng::new(5)).unwrap();
        let (b, _) = lstm_forward_with_masks(&seq, &p, LstmMasks::identity(3, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_upstream_zero_gradients() {
        let mut rng = Rng::new(3);
        let p = random_params(2, 3, &mut rng);
        let seq = random(&[2, 2], &mut rng, 1.0);
        let (_, cache) = lstm_forward_with_masks(&seq, &p, LstmMasks::identity(2, 3)).unwrap();
        let (gs, gp) = lstm_backward(&seq, &p, &cache, &[0.0; 3]).unwrap();
        assert!(gs.data().iter().all(|&v| v == 0.0));
        assert!(gp.w_input.data().iter().chain(gp.w_recurrent.data()).chain(gp.bias.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn recurrent_gradient_vanishes_for_single_step() {
        let mut rng = Rng::new(4);
        let p = random_params(2, 2, &mut rng);
        let seq = random(&[1, 2], &mut rng, 1.0);
        let (_, cache) = lstm_forward_with_masks(&seq, &p, LstmMasks::identity(2, 2)).unwrap();
        let (_, gp) = lstm_backward(&seq, &p, &cache, &[1.0, -0.5]).unwrap();
        assert!(gp.w_recurrent.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn finite_difference_with_fixed_masks() {
        let mut rng = Rng::new(12);
        let p = random_params(2, 2, &mut rng);
        let seq = random(&[2, 2], &mut rng, 1.0);
        let masks = LstmMasks {
            input: vec![1.0 / 0.9, 0.0],
            recurrent: vec![2.0, 2.0],
        };
        let up = [0.7, -1.1];
        let loss = |seq: &Tensor, p: &LstmParams| {
            let (h, _) = lstm_forward_with_masks(seq, p, masks.clone()).unwrap();
            h.iter().zip(&up).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = lstm_forward_with_masks(&seq, &p, masks.clone()).unwrap();
        let (gs, gp) = lstm_backward(&seq, &p, &cache, &up).unwrap();
        let num_seq = numeric_gradient(seq.data(), 1e-5, |v| loss(&Tensor::new(vec![2, 2], v.to_vec()).unwrap(), &p));
        assert!(max_relative_error(gs.data(), &num_seq) < 1e-5);
        let num_rec = numeric_gradient(p.w_recurrent.data(), 1e-5, |v| {
            let q = LstmParams::new(p.w_input.clone(), Tensor::new(vec![8, 2], v.to_vec()).unwrap(), p.bias.clone()).unwrap();
            loss(&seq, &q)
        });
        assert!(max_relative_error(gp.w_recurrent.data(), &num_rec) < 1e-5);
    }
}
