//! The CNN + LSTM voice-pathology architecture.
//!
//! Per segment: two same-padded conv layers, max pooling, two more conv
//! layers, max pooling, flatten. The flattened segments form the LSTM input
//! sequence; the final LSTM state feeds two ReLU dense layers and a softmax
//! output. With the reference configuration the model has 428,772 trainable
//! parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::SegmentMatrix;
use crate::label::Label;
use crate::nn::{Activation, Layer, LayerSpec, Mode, Model, NnError, Rng};

#[derive(Debug, Error)]
pub enum ArchitectureError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStack {
    pub filters: usize,
    pub kernel_size: usize,
    pub layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub frame_features: usize,
    pub conv_stack1: ConvStack,
    pub pool1: usize,
    pub conv_stack2: ConvStack,
    pub pool2: usize,
    pub lstm_units: usize,
    pub lstm_input_dropout: f64,
    pub lstm_recurrent_dropout: f64,
    pub dense_units: Vec<usize>,
    pub output_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            frame_features: 3200,
            conv_stack1: ConvStack {
                filters: 16,
                kernel_size: 160,
                layers: 2,
            },
            pool1: 4,
            conv_stack2: ConvStack {
                filters: 13,
                kernel_size: 320,
                layers: 2,
            },
            pool2: 4,
            lstm_units: 25,
            lstm_input_dropout: 0.1,
            lstm_recurrent_dropout: 0.5,
            dense_units: vec![32, 32],
            output_classes: 2,
        }
    }
}

impl ModelConfig {
    /// Desk-scale variant for 8 kHz audio: 512-sample frames, kernels 31 and 63.
    pub fn desk_scale() -> Self {
        Self {
            frame_features: 512,
            conv_stack1: ConvStack {
                filters: 16,
                kernel_size: 31,
                layers: 2,
            },
            conv_stack2: ConvStack {
                filters: 13,
                kernel_size: 63,
                layers: 2,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ArchitectureError> {
        let bad = |msg: &str| Err(ArchitectureError::InvalidConfig(msg.to_string()));
        let sizes = [
            ("frame_features", self.frame_features),
            ("conv_stack1 filters", self.conv_stack1.filters),
            ("conv_stack1 kernel", self.conv_stack1.kernel_size),
            ("conv_stack2 filters", self.conv_stack2.filters),
            ("conv_stack2 kernel", self.conv_stack2.kernel_size),
            ("pool1", self.pool1),
            ("pool2", self.pool2),
            ("lstm_units", self.lstm_units),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(ArchitectureError::InvalidConfig(format!("{name} must be positive")));
        }
        if self.dense_units.contains(&0) {
            return bad("dense_units must be positive");
        }
        if self.output_classes != 2 {
            return bad("output_classes must be 2");
        }
        for rate in [self.lstm_input_dropout, self.lstm_recurrent_dropout] {
            if !(0.0..1.0).contains(&rate) {
                return bad("lstm dropout rates must lie in [0, 1)");
            }
        }
        if self.pooled_len() == 0 {
            return Err(ArchitectureError::InvalidConfig(format!(
                "frame_features {} too short for pooling {} x {}",
                self.frame_features, self.pool1, self.pool2
            )));
        }
        Ok(())
    }

    fn pooled_len(&self) -> usize {
        self.frame_features / self.pool1 / self.pool2
    }

    fn last_conv_filters(&self) -> usize {
        if self.conv_stack2.layers > 0 {
            self.conv_stack2.filters
        } else if self.conv_stack1.layers > 0 {
            self.conv_stack1.filters
        } else {
            1
        }
    }

    /// Width of the flattened per-segment vector entering the LSTM.
    pub fn lstm_input_dim(&self) -> usize {
        self.last_conv_filters() * self.pooled_len()
    }

    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>, ArchitectureError> {
        self.validate()?;
        let mut specs = Vec::new();
        let mut channels = 1;
        let mut push_stack = |specs: &mut Vec<LayerSpec>, stack: ConvStack| {
            for _ in 0..stack.layers {
                specs.push(LayerSpec::Conv1dSame {
                    in_channels: channels,
                    out_channels: stack.filters,
                    kernel_size: stack.kernel_size,
                    activation: Activation::Relu,
                });
                channels = stack.filters;
            }
        };
        push_stack(&mut specs, self.conv_stack1);
        specs.push(LayerSpec::MaxPool1d { pool_size: self.pool1 });
        push_stack(&mut specs, self.conv_stack2);
        specs.push(LayerSpec::MaxPool1d { pool_size: self.pool2 });
        specs.push(LayerSpec::FlattenPerStep);
        specs.push(LayerSpec::Lstm {
            input_dim: self.lstm_input_dim(),
            units: self.lstm_units,
            input_dropout: self.lstm_input_dropout,
            recurrent_dropout: self.lstm_recurrent_dropout,
        });
        let mut width = self.lstm_units;
        for &units in &self.dense_units {
            specs.push(LayerSpec::Dense {
                input_dim: width,
                units,
                activation: Activation::Relu,
            });
            width = units;
        }
        specs.push(LayerSpec::SoftmaxDense {
            input_dim: width,
            units: self.output_classes,
        });
        Ok(specs)
    }
}

/// Builds and Glorot-initializes the model described by `cfg`.
pub fn build_model(cfg: &ModelConfig, rng: &mut Rng) -> Result<Model, ArchitectureError> {
    let layers = cfg
        .layer_specs()?
        .iter()
        .map(|spec| spec.init(rng))
        .collect::<Result<Vec<Layer>, _>>()?;
    Ok(Model::new(layers)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub params: usize,
}

/// Layer-by-layer output shapes. Shapes up to the flatten layer are per
/// segment; the LSTM and later layers are per file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTrace {
    pub entries: Vec<ShapeEntry>,
}

impl ShapeTrace {
    pub fn total_params(&self) -> usize {
        self.entries.iter().map(|e| e.params).sum()
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.entries.iter().map(|e| e.shape.clone()).collect()
    }

    /// Fixed-width table of layer, output shape and parameter count.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<20} {:<16} {:>10}\n", "layer", "output shape", "params"));
        out.push_str(&format!("{}\n", "-".repeat(48)));
        for e in &self.entries {
            let dims: Vec<String> = e.shape.iter().map(usize::to_string).collect();
            out.push_str(&format!("{:<20} {:<16} {:>10}\n", e.name, format!("({})", dims.join(", ")), e.params));
        }
        out.push_str(&format!("{}\n", "-".repeat(48)));
        out.push_str(&format!("total trainable parameters: {}\n", self.total_params()));
        out
    }
}

/// Traces a layer list on a `[1, frame_len]` segment.
pub fn shape_trace(specs: &[LayerSpec], frame_len: usize) -> Result<ShapeTrace, NnError> {
    let mut shape = vec![1, frame_len];
    let mut entries = vec![ShapeEntry {
        name: "input".into(),
        shape: shape.clone(),
        params: 0,
    }];
    let mut ordinals = std::collections::HashMap::new();
    for spec in specs {
        shape = spec.output_shape(&shape)?;
        let n = ordinals.entry(spec.kind_name()).or_insert(0);
        *n += 1;
        entries.push(ShapeEntry {
            name: format!("{}_{}", spec.kind_name(), n),
            shape: shape.clone(),
            params: spec.trainable_count(),
        });
    }
    Ok(ShapeTrace { entries })
}

pub fn model_shape_trace(model: &Model, frame_len: usize) -> Result<ShapeTrace, NnError> {
    let specs: Vec<LayerSpec> = model.layers().iter().map(Layer::spec).collect();
    shape_trace(&specs, frame_len)
}

/// Frame length a model's LSTM input implies, searching the per-step stage.
pub fn infer_frame_len(model: &Model, candidates: impl IntoIterator<Item = usize>) -> Option<usize> {
    candidates
        .into_iter()
        .find(|&len| model.per_step_shapes(len).is_ok())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Indexed by [`Label::index`].
    pub probabilities: [f64; 2],
}

impl Prediction {
    /// Argmax with ties resolved toward pathological.
    pub fn from_probabilities(probabilities: [f64; 2]) -> Self {
        let label = if probabilities[0] >= probabilities[1] {
            Label::Pathological
        } else {
            Label::Healthy
        };
        Self { label, probabilities }
    }
}

/// Classifies one file from its segment matrix, with dropout disabled.
pub fn predict_file(model: &Model, segments: &SegmentMatrix) -> Result<Prediction, NnError> {
    if model.output_classes() != 2 {
        return Err(NnError::ShapeMismatch(format!(
            "binary prediction needs 2 outputs, model has {}",
            model.output_classes()
        )));
    }
    let pass = model.forward(segments, Mode::Inference)?;
    Ok(Prediction::from_probabilities([pass.probabilities[0], pass.probabilities[1]]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_layer_counts() {
        let specs = ModelConfig::default().layer_specs().unwrap();
        let counts: Vec<usize> = specs.iter().map(LayerSpec::trainable_count).filter(|&c| c > 0).collect();
        assert_eq!(counts, vec![2576, 40976, 66573, 54093, 262_600, 832, 1056, 66]);
        assert_eq!(counts.iter().sum::<usize>(), 428_772);
    }

    #[test]
    fn reference_shape_trace() {
        let specs = ModelConfig::default().layer_specs().unwrap();
        let trace = shape_trace(&specs, 3200).unwrap();
        let expected: Vec<Vec<usize>> = vec![
            vec![1, 3200],
            vec![16, 3200],
            vec![16, 3200],
            vec![16, 800],
            vec![13, 800],
            vec![13, 800],
            vec![13, 200],
            vec![2600],
            vec![25],
            vec![32],
            vec![32],
            vec![2],
        ];
        assert_eq!(trace.shapes(), expected);
        assert!(trace.render_table().ends_with("total trainable parameters: 428772\n"));
    }

    #[test]
    fn degenerate_config() {
        let one = ConvStack {
            filters: 1,
            kernel_size: 1,
            layers: 2,
        };
        let cfg = ModelConfig {
            frame_features: 4,
            conv_stack1: one,
            pool1: 1,
            conv_stack2: one,
            pool2: 1,
            lstm_units: 1,
            dense_units: vec![1, 1],
            ..ModelConfig::default()
        };
        let model = build_model(&cfg, &mut Rng::new(0)).unwrap();
        // four 1x1 convs, lstm 4*(1*(4+1)+1), dense 2 + 2, softmax 2*(1+1)
        assert_eq!(model.trainable_count(), 4 * 2 + 24 + 2 + 2 + 4);
    }

    #[test]
    fn invalid_configs() {
        let cfg = ModelConfig {
            output_classes: 3,
            ..ModelConfig::default()
        };
        assert!(matches!(build_model(&cfg, &mut Rng::new(0)), Err(ArchitectureError::InvalidConfig(_))));
        let cfg = ModelConfig {
            frame_features: 10,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tie_breaks_to_pathological() {
        assert_eq!(Prediction::from_probabilities([0.7, 0.3]).label, Label::Pathological);
        assert_eq!(Prediction::from_probabilities([0.5, 0.5]).label, Label::Pathological);
        assert_eq!(Prediction::from_probabilities([0.2, 0.8]).label, Label::Healthy);
    }
}
