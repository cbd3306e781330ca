//! Sequential model over a per-file segment sequence.
//!
//! Layers are arranged in three stages: per-step layers (convolution,
//! pooling, flatten) applied independently to every segment, one LSTM
//! consuming the resulting sequence, then dense layers ending in a softmax
//! output. Forward passes return their caches instead of storing them, so
//! a `Model` can be shared immutably across inference calls.

use crate::audio::SegmentMatrix;

use super::conv::{conv1d_same_backward, conv1d_same_forward};
use super::dense::{dense_backward, dense_forward, softmax};
use super::lstm::{lstm_backward, lstm_forward, LstmCache};
use super::pool::{maxpool1d, maxpool1d_backward};
use super::{trainable_count, Activation, Layer, NnError, Rng, Tensor};

pub enum Mode<'a> {
    Inference,
    Training(&'a mut Rng),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Training(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layers: Vec<Layer>,
    lstm_index: usize,
}

/// Per-segment intermediate results of the per-step stage.
#[derive(Debug, Clone)]
struct StepTrace {
    /// `activations[i]` is the input to per-step layer `i`; the last entry is the flattened output.
    activations: Vec<Tensor>,
    /// Argmax indices for pooling layers, empty otherwise.
    argmax: Vec<Vec<usize>>,
}

/// Everything a backward pass needs from the matching forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    steps: Vec<StepTrace>,
    sequence: Tensor,
    lstm: LstmCache,
    /// `vectors[0]` is the final LSTM state, then each dense output; the last entry is the logits.
    vectors: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
}

impl ForwardPass {
    pub fn logits(&self) -> &[f64] {
        self.vectors.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Model {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        let invalid = |msg: String| Err(NnError::InvalidModel(msg));
        for layer in &layers {
            layer.spec().validate()?;
        }
        let Some(lstm_index) = layers.iter().position(|l| matches!(l, Layer::Lstm { .. })) else {
            return invalid("model needs exactly one lstm layer".into());
        };
        if layers[lstm_index + 1..].iter().any(|l| matches!(l, Layer::Lstm { .. })) {
            return invalid("model needs exactly one lstm layer".into());
        }
        let front = &layers[..lstm_index];
        if let Some(bad) = front.iter().find(|l| !l.is_per_step()) {
            return invalid(format!("{} cannot precede the lstm", bad.spec().kind_name()));
        }
        if !matches!(front.last(), Some(Layer::FlattenPerStep)) {
            return invalid("the per-step stage must end with flatten_per_step".into());
        }
        if front.iter().filter(|l| matches!(l, Layer::FlattenPerStep)).count() != 1 {
            return invalid("flatten_per_step must appear exactly once".into());
        }
        let mut channels = 1;
        for layer in front {
            if let Layer::Conv1dSame { params, .. } = layer {
                if params.in_channels() != channels {
                    return invalid(format!(
                        "conv expects {} input channels but receives {channels}",
                        params.in_channels()
                    ));
                }
                channels = params.out_channels();
            }
        }
        let back = &layers[lstm_index + 1..];
        if !matches!(back.last(), Some(Layer::SoftmaxDense { .. })) {
            return invalid("model must end with softmax_dense".into());
        }
        let mut width = match &layers[lstm_index] {
            Layer::Lstm { params, .. } => params.units(),
            _ => unreachable!(),
        };
        for (i, layer) in back.iter().enumerate() {
            match layer {
                Layer::Dense { params, .. } => {
                    if params.input_dim() != width {
                        return invalid(format!("dense expects {} inputs but receives {width}", params.input_dim()));
                    }
                    width = params.units();
                }
                Layer::SoftmaxDense { params } if i + 1 == back.len() => {
                    if params.input_dim() != width {
                        return invalid(format!("softmax_dense expects {} inputs but receives {width}", params.input_dim()));
                    }
                    if params.units() < 2 {
                        return invalid("softmax_dense needs at least 2 units".into());
                    }
                }
                other => return invalid(format!("{} cannot follow the lstm", other.spec().kind_name())),
            }
        }
        Ok(Self { layers, lstm_index })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn trainable_count(&self) -> usize {
        trainable_count(&self.layers)
    }

    pub fn output_classes(&self) -> usize {
        match self.layers.last() {
            Some(Layer::SoftmaxDense { params }) => params.units(),
            _ => 0,
        }
    }

    /// All parameter tensors, layer by layer.
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Per-step shapes from a `[1, frame_len]` segment to the LSTM input.
    pub fn per_step_shapes(&self, frame_len: usize) -> Result<Vec<Vec<usize>>, NnError> {
        let mut shapes = vec![vec![1, frame_len]];
        for layer in &self.layers[..=self.lstm_index] {
            let next = layer.spec().output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn forward(&self, segments: &SegmentMatrix, mode: Mode<'_>) -> Result<ForwardPass, NnError> {
        if segments.rows == 0 {
            return Err(NnError::ShapeMismatch("file has no segments".into()));
        }
        let front = &self.layers[..self.lstm_index];
        let mut steps = Vec::with_capacity(segments.rows);
        let mut flat = Vec::new();
        for row in segments.iter_rows() {
            let mut x = Tensor::new(vec![1, segments.cols], row.to_vec())?;
            x.ensure_finite("segment")?;
            let mut activations = Vec::with_capacity(front.len() + 1);
            let mut argmax = Vec::with_capacity(front.len());
            for layer in front {
                let (y, arg) = match layer {
                    Layer::Conv1dSame { params, activation } => {
                        (conv1d_same_forward(&x, params, *activation)?, Vec::new())
                    }
                    Layer::MaxPool1d { pool_size } => maxpool1d(&x, *pool_size)?,
                    Layer::FlattenPerStep => {
                        let len = x.len();
                        (x.clone().reshape(vec![len])?, Vec::new())
                    }
                    _ => unreachable!("validated in Model::new"),
                };
                y.ensure_finite(layer.spec().kind_name())?;
                activations.push(std::mem::replace(&mut x, y));
                argmax.push(arg);
            }
            flat.extend_from_slice(x.data());
            activations.push(x);
            steps.push(StepTrace { activations, argmax });
        }
        let width = flat.len() / segments.rows;
        let sequence = Tensor::new(vec![segments.rows, width], flat)?;

        let Layer::Lstm { params, rates } = &self.layers[self.lstm_index] else {
            unreachable!("validated in Model::new")
        };
        let (h, lstm) = match mode {
            Mode::Training(rng) => lstm_forward(&sequence, params, *rates, true, rng)?,
            Mode::Inference => lstm_forward(&sequence, params, *rates, false, &mut Rng::new(0))?,
        };
        super::tensor::ensure_finite(&h, "lstm")?;

        let mut vectors = vec![h];
        for layer in &self.layers[self.lstm_index + 1..] {
            let x = vectors.last().unwrap();
            let y = match layer {
                Layer::Dense { params, activation } => dense_forward(x, params, *activation)?,
                Layer::SoftmaxDense { params } => dense_forward(x, params, Activation::Linear)?,
                _ => unreachable!("validated in Model::new"),
            };
            super::tensor::ensure_finite(&y, layer.spec().kind_name())?;
            vectors.push(y);
        }
        let probabilities = softmax(vectors.last().unwrap())?;
        Ok(ForwardPass {
            steps,
            sequence,
            lstm,
            vectors,
            probabilities,
        })
    }

    /// Parameter gradients, aligned with [`Model::parameters`], given the
    /// loss gradient with respect to the output logits.
    pub fn backward(&self, pass: &ForwardPass, grad_logits: &[f64]) -> Result<Vec<Tensor>, NnError> {
        super::tensor::ensure_finite(grad_logits, "logit gradient")?;
        let mut layer_grads: Vec<Vec<Tensor>> = self
            .layers
            .iter()
            .map(|l| l.params().into_iter().map(Tensor::zeros_like).collect())
            .collect();

        let mut grad = grad_logits.to_vec();
        for (offset, layer) in self.layers[self.lstm_index + 1..].iter().enumerate().rev() {
            let idx = self.lstm_index + 1 + offset;
            let input = &pass.vectors[offset];
            let output = &pass.vectors[offset + 1];
            let (gin, gp) = match layer {
                Layer::Dense { params, activation } => dense_backward(input, params, *activation, output, &grad)?,
                Layer::SoftmaxDense { params } => dense_backward(input, params, Activation::Linear, output, &grad)?,
                _ => unreachable!("validated in Model::new"),
            };
            layer_grads[idx] = vec![gp.weight, gp.bias];
            grad = gin;
        }

        let Layer::Lstm { params, .. } = &self.layers[self.lstm_index] else {
            unreachable!("validated in Model::new")
        };
        let (grad_seq, gp) = lstm_backward(&pass.sequence, params, &pass.lstm, &grad)?;
        layer_grads[self.lstm_index] = vec![gp.w_input, gp.w_recurrent, gp.bias];

        let front = &self.layers[..self.lstm_index];
        let width = pass.sequence.shape()[1];
        for (step, g_row) in pass.steps.iter().zip(grad_seq.data().chunks_exact(width)) {
            let mut g = Tensor::from_vec(g_row.to_vec());
            for (i, layer) in front.iter().enumerate().rev() {
                let input = &step.activations[i];
                let output = &step.activations[i + 1];
                g = match layer {
                    Layer::Conv1dSame { params, activation } => {
                        let (gin, gp) = conv1d_same_backward(input, params, *activation, output, &g, i > 0)?;
                        layer_grads[i][0].add_assign(&gp.weight);
                        layer_grads[i][1].add_assign(&gp.bias);
                        match gin {
                            Some(t) => t,
                            None => break,
                        }
                    }
                    Layer::MaxPool1d { .. } => maxpool1d_backward(input.shape(), &step.argmax[i], &g)?,
                    Layer::FlattenPerStep => g.reshape(input.shape().to_vec())?,
                    _ => unreachable!("validated in Model::new"),
                };
            }
        }
        let grads: Vec<Tensor> = layer_grads.into_iter().flatten().collect();
        for g in &grads {
            g.ensure_finite("parameter gradient")?;
        }
        Ok(grads)
    }
}
