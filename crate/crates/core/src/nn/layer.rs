use super::{
    glorot_uniform_init, Activation, ConvParams, DenseParams, DropoutRates, LstmParams, NnError, Rng, Tensor,
};

/// Architecture-level description of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Conv1dSame {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        activation: Activation,
    },
    MaxPool1d {
        pool_size: usize,
    },
    FlattenPerStep,
    Lstm {
        input_dim: usize,
        units: usize,
        input_dropout: f64,
        recurrent_dropout: f64,
    },
    Dense {
        input_dim: usize,
        units: usize,
        activation: Activation,
    },
    SoftmaxDense {
        input_dim: usize,
        units: usize,
    },
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Conv1dSame { .. } => "conv1d_same",
            Self::MaxPool1d { .. } => "maxpool1d",
            Self::FlattenPerStep => "flatten_per_step",
            Self::Lstm { .. } => "lstm",
            Self::Dense { .. } => "dense",
            Self::SoftmaxDense { .. } => "softmax_dense",
        }
    }

    pub(crate) fn tag(&self) -> u8 {
        match self {
            Self::Conv1dSame { .. } => 0,
            Self::MaxPool1d { .. } => 1,
            Self::FlattenPerStep => 2,
            Self::Lstm { .. } => 3,
            Self::Dense { .. } => 4,
            Self::SoftmaxDense { .. } => 5,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(NnError::InvalidSpec(format!("{}: {name} must be >= 1", self.kind_name())))
            } else {
                Ok(())
            }
        };
        match *self {
            Self::Conv1dSame {
                in_channels,
                out_channels,
                kernel_size,
                ..
            } => {
                positive("in_channels", in_channels)?;
                positive("out_channels", out_channels)?;
                positive("kernel_size", kernel_size)
            }
            Self::MaxPool1d { pool_size } => positive("pool_size", pool_size),
            Self::FlattenPerStep => Ok(()),
            Self::Lstm {
                input_dim,
                units,
                input_dropout,
                recurrent_dropout,
            } => {
                positive("input_dim", input_dim)?;
                positive("units", units)?;
                for rate in [input_dropout, recurrent_dropout] {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(NnError::InvalidSpec(format!("lstm dropout rate {rate} outside [0, 1)")));
                    }
                }
                Ok(())
            }
            Self::Dense { input_dim, units, .. } | Self::SoftmaxDense { input_dim, units } => {
                positive("input_dim", input_dim)?;
                positive("units", units)
            }
        }
    }

    /// Closed-form trainable parameter count.
    pub fn trainable_count(&self) -> usize {
        match *self {
            Self::Conv1dSame {
                in_channels,
                out_channels,
                kernel_size,
                ..
            } => out_channels * (in_channels * kernel_size + 1),
            Self::MaxPool1d { .. } | Self::FlattenPerStep => 0,
            Self::Lstm { input_dim, units, .. } => 4 * (units * (input_dim + units) + units),
            Self::Dense { input_dim, units, .. } | Self::SoftmaxDense { input_dim, units } => units * (input_dim + 1),
        }
    }

    /// Output shape for one step given the input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let mismatch = |expected: String| {
            NnError::ShapeMismatch(format!("{}: expected {expected}, got {input:?}", self.kind_name()))
        };
        match *self {
            Self::Conv1dSame {
                in_channels,
                out_channels,
                ..
            } => match input {
                [c, l] if *c == in_channels => Ok(vec![out_channels, *l]),
                _ => Err(mismatch(format!("[{in_channels}, L]"))),
            },
            Self::MaxPool1d { pool_size } => match input {
                [c, l] if *l >= pool_size => Ok(vec![*c, l / pool_size]),
                [_, l] => Err(NnError::TooShort { len: *l, pool: pool_size }),
                _ => Err(mismatch("[C, L]".into())),
            },
            Self::FlattenPerStep => match input {
                [c, l] => Ok(vec![c * l]),
                _ => Err(mismatch("[C, L]".into())),
            },
            Self::Lstm { input_dim, units, .. } => match input {
                [d] if *d == input_dim => Ok(vec![units]),
                _ => Err(mismatch(format!("[{input_dim}]"))),
            },
            Self::Dense { input_dim, units, .. } | Self::SoftmaxDense { input_dim, units } => match input {
                [d] if *d == input_dim => Ok(vec![units]),
                _ => Err(mismatch(format!("[{input_dim}]"))),
            },
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&self, rng: &mut Rng) -> Result<Layer, NnError> {
        self.validate()?;
        Ok(match *self {
            Self::Conv1dSame {
                in_channels,
                out_channels,
                kernel_size,
                activation,
            } => Layer::Conv1dSame {
                params: ConvParams::new(
                    glorot_uniform_init(
                        in_channels * kernel_size,
                        out_channels * kernel_size,
                        &[out_channels, in_channels, kernel_size],
                        rng,
                    )?,
                    Tensor::zeros(&[out_channels]),
                )?,
                activation,
            },
            Self::MaxPool1d { pool_size } => Layer::MaxPool1d { pool_size },
            Self::FlattenPerStep => Layer::FlattenPerStep,
            Self::Lstm {
                input_dim,
                units,
                input_dropout,
                recurrent_dropout,
            } => Layer::Lstm {
                params: LstmParams::new(
                    glorot_uniform_init(input_dim, 4 * units, &[4 * units, input_dim], rng)?,
                    glorot_uniform_init(units, 4 * units, &[4 * units, units], rng)?,
                    Tensor::zeros(&[4 * units]),
                )?,
                rates: DropoutRates {
                    input: input_dropout,
                    recurrent: recurrent_dropout,
                },
            },
            Self::Dense {
                input_dim,
                units,
                activation,
            } => Layer::Dense {
                params: DenseParams::new(
                    glorot_uniform_init(input_dim, units, &[units, input_dim], rng)?,
                    Tensor::zeros(&[units]),
                )?,
                activation,
            },
            Self::SoftmaxDense { input_dim, units } => Layer::SoftmaxDense {
                params: DenseParams::new(
                    glorot_uniform_init(input_dim, units, &[units, input_dim], rng)?,
                    Tensor::zeros(&[units]),
                )?,
            },
        })
    }
}

/// A layer together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv1dSame { params: ConvParams, activation: Activation },
    MaxPool1d { pool_size: usize },
    FlattenPerStep,
    Lstm { params: LstmParams, rates: DropoutRates },
    Dense { params: DenseParams, activation: Activation },
    SoftmaxDense { params: DenseParams },
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Self::Conv1dSame { params, activation } => LayerSpec::Conv1dSame {
                in_channels: params.in_channels(),
                out_channels: params.out_channels(),
                kernel_size: params.kernel_size(),
                activation: *activation,
            },
            Self::MaxPool1d { pool_size } => LayerSpec::MaxPool1d { pool_size: *pool_size },
            Self::FlattenPerStep => LayerSpec::FlattenPerStep,
            Self::Lstm { params, rates } => LayerSpec::Lstm {
                input_dim: params.input_dim(),
                units: params.units(),
                input_dropout: rates.input,
                recurrent_dropout: rates.recurrent,
            },
            Self::Dense { params, activation } => LayerSpec::Dense {
                input_dim: params.input_dim(),
                units: params.units(),
                activation: *activation,
            },
            Self::SoftmaxDense { params } => LayerSpec::SoftmaxDense {
                input_dim: params.input_dim(),
                units: params.units(),
            },
        }
    }

    /// Parameter tensors in a fixed order (weights before biases).
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Self::Conv1dSame { params, .. } => vec![&params.weight, &params.bias],
            Self::Lstm { params, .. } => vec![&params.w_input, &params.w_recurrent, &params.bias],
            Self::Dense { params, .. } | Self::SoftmaxDense { params } => vec![&params.weight, &params.bias],
            Self::MaxPool1d { .. } | Self::FlattenPerStep => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Self::Conv1dSame { params, .. } => vec![&mut params.weight, &mut params.bias],
            Self::Lstm { params, .. } => vec![&mut params.w_input, &mut params.w_recurrent, &mut params.bias],
            Self::Dense { params, .. } | Self::SoftmaxDense { params } => vec![&mut params.weight, &mut params.bias],
            Self::MaxPool1d { .. } | Self::FlattenPerStep => Vec::new(),
        }
    }

    pub fn is_per_step(&self) -> bool {
        matches!(self, Self::Conv1dSame { .. } | Self::MaxPool1d { .. } | Self::FlattenPerStep)
    }
}

/// Sum of the closed-form per-layer counts.
pub fn trainable_count(layers: &[Layer]) -> usize {
    layers.iter().map(|l| l.spec().trainable_count()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_counts() {
        assert_eq!(trainable_count(&[]), 0);
        let dense = LayerSpec::Dense {
            input_dim: 25,
            units: 32,
            activation: Activation::Relu,
        };
        assert_eq!(dense.trainable_count(), 832);
        let lstm = LayerSpec::Lstm {
            input_dim: 2600,
            units: 25,
            input_dropout: 0.1,
            recurrent_dropout: 0.5,
        };
        assert_eq!(lstm.trainable_count(), 262_600);
    }

    #[test]
    fn stored_parameters_match_closed_form() {
        let mut rng = Rng::new(0);
        let specs = [
            LayerSpec::Conv1dSame {
                in_channels: 3,
                out_channels: 4,
                kernel_size: 5,
                activation: Activation::Relu,
            },
            LayerSpec::MaxPool1d { pool_size: 2 },
            LayerSpec::FlattenPerStep,
            LayerSpec::Lstm {
                input_dim: 7,
                units: 3,
                input_dropout: 0.0,
                recurrent_dropout: 0.0,
            },
            LayerSpec::Dense {
                input_dim: 3,
                units: 2,
                activation: Activation::Tanh,
            },
            LayerSpec::SoftmaxDense { input_dim: 2, units: 2 },
        ];
        for spec in specs {
            let layer = spec.init(&mut rng).unwrap();
            let stored: usize = layer.params().iter().map(|t| t.len()).sum();
            assert_eq!(stored, spec.trainable_count(), "{}", spec.kind_name());
            assert_eq!(layer.spec(), spec);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(LayerSpec::MaxPool1d { pool_size: 0 }.validate().is_err());
        assert!(LayerSpec::Lstm {
            input_dim: 2,
            units: 2,
            input_dropout: 1.0,
            recurrent_dropout: 0.0
        }
        .validate()
        .is_err());
    }
}
