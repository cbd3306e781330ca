//! Cross-entropy loss, Adam, reduce-on-plateau and early stopping.

use thiserror::Error;

use crate::nn::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient in parameter tensor {0}")]
    NonFiniteGradient(usize),
}

/// Lower clip for probabilities inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-sum_k y_k ln(clip(p_k, 1e-12, 1))`
pub fn cross_entropy(probabilities: &[f64], target: &[f64]) -> Result<f64, OptimError> {
    if probabilities.len() != target.len() {
        return Err(OptimError::ShapeMismatch(format!(
            "{} probabilities for {} targets",
            probabilities.len(),
            target.len()
        )));
    }
    Ok(-probabilities
        .iter()
        .zip(target)
        .map(|(p, y)| y * p.clamp(PROB_FLOOR, 1.0).ln())
        .sum::<f64>())
}

/// Gradient of softmax followed by cross-entropy with respect to the logits: `p - y`.
pub fn softmax_cross_entropy_grad(probabilities: &[f64], target: &[f64]) -> Result<Vec<f64>, OptimError> {
    if probabilities.len() != target.len() {
        return Err(OptimError::ShapeMismatch(format!(
            "{} probabilities for {} targets",
            probabilities.len(),
            target.len()
        )));
    }
    Ok(probabilities.iter().zip(target).map(|(p, y)| p - y).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh moments shaped like `params`, with the default betas and epsilon.
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>, learning_rate: f64) -> Self {
        let m: Vec<Tensor> = params.into_iter().map(Tensor::zeros_like).collect();
        Self {
            v: m.clone(),
            m,
            t: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Nothing is modified if any gradient is non-finite.
pub fn adam_step(params: &mut [&mut Tensor], grads: &[Tensor], state: &mut AdamState) -> Result<(), OptimError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(OptimError::ShapeMismatch(format!(
            "{} parameters, {} gradients, {} moment tensors",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(OptimError::ShapeMismatch(format!(
                "tensor {i}: parameter {:?}, gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
        if g.data().iter().any(|v| !v.is_finite()) {
            return Err(OptimError::NonFiniteGradient(i));
        }
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let t = state.t as i32;
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let iter = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((theta, &grad), (mk, vk)) in iter {
            *mk = b1 * *mk + (1.0 - b1) * grad;
            *vk = b2 * *vk + (1.0 - b2) * grad * grad;
            let m_hat = *mk / correction1;
            let v_hat = *vk / correction2;
            *theta -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Bookkeeping for the accuracy-driven learning-rate plateau and the
/// loss-driven early stop.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleState {
    pub best_val_accuracy: f64,
    pub epochs_since_acc_improvement: usize,
    pub lr_patience: usize,
    pub lr_factor: f64,
    pub min_lr: f64,
    pub best_val_loss: f64,
    pub epochs_since_loss_improvement: usize,
    pub stop_patience: usize,
}

impl Default for ScheduleState {
    fn default() -> Self {
        Self::new(8, 0.5, 1e-7, 20)
    }
}

impl ScheduleState {
    pub fn new(lr_patience: usize, lr_factor: f64, min_lr: f64, stop_patience: usize) -> Self {
        Self {
            best_val_accuracy: f64::NEG_INFINITY,
            epochs_since_acc_improvement: 0,
            lr_patience,
            lr_factor,
            min_lr,
            best_val_loss: f64::INFINITY,
            epochs_since_loss_improvement: 0,
            stop_patience,
        }
    }

    /// Halves (by `lr_factor`) the rate after `lr_patience` epochs without a
    /// strict accuracy improvement, never going below `min_lr`.
    pub fn plateau_update(&mut self, epoch_val_accuracy: f64, learning_rate: f64) -> f64 {
        if epoch_val_accuracy > self.best_val_accuracy {
            self.best_val_accuracy = epoch_val_accuracy;
            self.epochs_since_acc_improvement = 0;
            return learning_rate;
        }
        self.epochs_since_acc_improvement += 1;
        if self.epochs_since_acc_improvement >= self.lr_patience {
            self.epochs_since_acc_improvement = 0;
            return (learning_rate * self.lr_factor).max(self.min_lr);
        }
        learning_rate
    }

    pub fn early_stop_update(&mut self, epoch_val_loss: f64) -> StopDecision {
        if epoch_val_loss < self.best_val_loss {
            self.best_val_loss = epoch_val_loss;
            self.epochs_since_loss_improvement = 0;
            return StopDecision::Continue;
        }
        self.epochs_since_loss_improvement += 1;
        if self.epochs_since_loss_improvement >= self.stop_patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::numeric_gradient;
    use crate::nn::{softmax, Rng};
    use proptest::prelude::*;

    #[test]
    fn cross_entropy_values() {
        assert!((cross_entropy(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(cross_entropy(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(cross_entropy(&[0.0, 1.0], &[1.0, 0.0]).unwrap().is_finite());
        assert!(cross_entropy(&[1.0], &[1.0, 0.0]).is_err());
        assert_eq!(softmax_cross_entropy_grad(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), vec![-0.5, 0.5]);
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let mut rng = Rng::new(21);
        for _ in 0..20 {
            let logits: Vec<f64> = (0..2).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let target = if rng.bernoulli(0.5) { [1.0, 0.0] } else { [0.0, 1.0] };
            let p = softmax(&logits).unwrap();
            let analytic = softmax_cross_entropy_grad(&p, &target).unwrap();
            let numeric = numeric_gradient(&logits, 1e-5, |z| cross_entropy(&softmax(z).unwrap(), &target).unwrap());
            for (a, n) in analytic.iter().zip(numeric) {
                assert!((a - n).abs() < 1e-10, "{a} vs {n}");
            }
        }
    }

    #[test]
    fn zero_gradient_no_update() {
        let mut p = Tensor::from_vec(vec![1.0, -2.0]);
        let mut state = AdamState::new([&p], 6e-5);
        adam_step(&mut [&mut p], &[Tensor::zeros(&[2])], &mut state).unwrap();
        assert_eq!(p.data(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_bias_correction() {
        let mut p = Tensor::from_vec(vec![0.0]);
        let mut state = AdamState::new([&p], 6e-5);
        adam_step(&mut [&mut p], &[Tensor::from_vec(vec![0.5])], &mut state).unwrap();
        let expected = -6e-5 * (0.5 / (0.5 + 1e-8));
        assert!((p.data()[0] - expected).abs() < 1e-18);
        assert!((p.data()[0] + 5.99999988e-5).abs() < 1e-13);
    }

    #[test]
    fn quadratic_descent() {
        // Oracle: the scalar recurrence written out directly.
        let (mut theta, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut oracle = Vec::new();
        for t in 1..=100 {
            let g = 2.0 * theta;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            theta -= 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
            oracle.push(theta);
        }
        let mut p = Tensor::from_vec(vec![1.0]);
        let mut state = AdamState::new([&p], 0.1);
        let mut trace = Vec::new();
        for _ in 0..100 {
            let g = Tensor::from_vec(vec![2.0 * p.data()[0]]);
            adam_step(&mut [&mut p], &[g], &mut state).unwrap();
            trace.push(p.data()[0]);
        }
        for (a, b) in trace.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(p.data()[0].abs() < 0.5);
        assert!(trace[..5].windows(2).all(|w| w[1].abs() < w[0].abs()));
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = Tensor::from_vec(vec![1.0]);
        let mut state = AdamState::new([&p], 0.1);
        let err = adam_step(&mut [&mut p], &[Tensor::from_vec(vec![f64::NAN])], &mut state);
        assert_eq!(err, Err(OptimError::NonFiniteGradient(0)));
        assert_eq!(p.data(), &[1.0]);
        assert_eq!(state.t, 0);
    }

    #[test]
    fn plateau_halves_after_patience() {
        let mut s = ScheduleState::default();
        let mut lr = s.plateau_update(0.6, 6e-5);
        for _ in 0..7 {
            lr = s.plateau_update(0.6, lr);
            assert_eq!(lr, 6e-5);
        }
        lr = s.plateau_update(0.5, lr);
        assert_eq!(lr, 3e-5);
        assert_eq!(s.epochs_since_acc_improvement, 0);
    }

    #[test]
    fn plateau_improvement_resets() {
        let mut s = ScheduleState::default();
        let mut lr = s.plateau_update(0.6, 6e-5);
        for _ in 0..4 {
            lr = s.plateau_update(0.6, lr);
        }
        lr = s.plateau_update(0.7, lr);
        assert_eq!((lr, s.epochs_since_acc_improvement), (6e-5, 0));
    }

    #[test]
    fn plateau_clamps_at_min() {
        let mut s = ScheduleState::default();
        let mut lr = 6e-5;
        for _ in 0..8 * 20 {
            lr = s.plateau_update(0.0, lr);
            assert!(lr >= 1e-7);
        }
        assert_eq!(lr, 1e-7);
    }

    #[test]
    fn early_stop_contract() {
        let mut s = ScheduleState::default();
        for i in 0..50 {
            assert_eq!(s.early_stop_update(10.0 - i as f64 * 0.1), StopDecision::Continue);
        }
        let mut s = ScheduleState::default();
        assert_eq!(s.early_stop_update(1.0), StopDecision::Continue);
        for _ in 0..19 {
            assert_eq!(s.early_stop_update(1.0), StopDecision::Continue);
        }
        assert_eq!(s.early_stop_update(1.0), StopDecision::Stop);

        let mut s = ScheduleState::default();
        s.early_stop_update(1.0);
        for _ in 0..18 {
            s.early_stop_update(1.0);
        }
        assert_eq!(s.early_stop_update(0.9), StopDecision::Continue);
        assert_eq!(s.epochs_since_loss_improvement, 0);
    }

    proptest! {
        #[test]
        fn cross_entropy_nonnegative(a in 0.0f64..1.0, pick in 0usize..2) {
            let p = [a, 1.0 - a];
            let mut y = [0.0, 0.0];
            y[pick] = 1.0;
            prop_assert!(cross_entropy(&p, &y).unwrap() >= 0.0);
        }

        #[test]
        fn learning_rate_non_increasing(accs in proptest::collection::vec(0.0f64..1.0, 1..200)) {
            let mut s = ScheduleState::default();
            let mut lr = 6e-5;
            for acc in accs {
                let next = s.plateau_update(acc, lr);
                prop_assert!(next <= lr && (1e-7..=6e-5).contains(&next));
                lr = next;
            }
        }
    }
}
