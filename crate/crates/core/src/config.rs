//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, unknown keys are errors.
//! Every key defaults to the reference setup (50 kHz framing, full-size
//! model, reference schedule), so an empty file is a valid config.

use std::path::Path;

use thiserror::Error;

use crate::architecture::ModelConfig;
use crate::audio::{FrameConfig, WindowKind};
use crate::dataset::SplitSpec;
use crate::trainer::TrainConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown key `{key}` on line {line}")]
    UnknownKey { line: usize, key: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

/// Initial learning rate of [`RunConfig::desk_scale`].
pub const DESK_INITIAL_LR: f64 = 3e-4;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub frame: FrameConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitSpec,
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Parse {
        line,
        reason: format!("cannot parse `{value}` for `{key}`"),
    })
}

impl RunConfig {
    /// Desk-scale preset: the reduced kernels for 8 kHz audio, with a larger
    /// initial learning rate so the small corpus converges within 30 epochs.
    pub fn desk_scale() -> Self {
        Self {
            model: ModelConfig::desk_scale(),
            train: TrainConfig {
                initial_lr: DESK_INITIAL_LR,
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_onto(Self::default(), text)
    }

    /// Applies the settings in `text` over `base`.
    pub fn parse_onto(mut cfg: Self, text: &str) -> Result<Self, ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Parse {
                    line,
                    reason: format!("expected `key = value`, got `{content}`"),
                });
            };
            cfg.set(line, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "frame_ms" => self.frame.frame_ms = parse_value(line, key, value)?,
            "overlap_ms" => self.frame.overlap_ms = parse_value(line, key, value)?,
            "window" => {
                self.frame.window_kind = value
                    .parse::<WindowKind>()
                    .map_err(|reason| ConfigError::Parse { line, reason })?
            }
            "frame_features" => m.frame_features = parse_value(line, key, value)?,
            "conv1_filters" => m.conv_stack1.filters = parse_value(line, key, value)?,
            "conv1_kernel" => m.conv_stack1.kernel_size = parse_value(line, key, value)?,
            "conv1_layers" => m.conv_stack1.layers = parse_value(line, key, value)?,
            "pool1" => m.pool1 = parse_value(line, key, value)?,
            "conv2_filters" => m.conv_stack2.filters = parse_value(line, key, value)?,
            "conv2_kernel" => m.conv_stack2.kernel_size = parse_value(line, key, value)?,
            "conv2_layers" => m.conv_stack2.layers = parse_value(line, key, value)?,
            "pool2" => m.pool2 = parse_value(line, key, value)?,
            "lstm_units" => m.lstm_units = parse_value(line, key, value)?,
            "lstm_input_dropout" => m.lstm_input_dropout = parse_value(line, key, value)?,
            "lstm_recurrent_dropout" => m.lstm_recurrent_dropout = parse_value(line, key, value)?,
            "dense_units" => {
                m.dense_units = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|v| parse_value(line, key, v.trim()))
                        .collect::<Result<_, _>>()?
                }
            }
            "output_classes" => m.output_classes = parse_value(line, key, value)?,
            "max_epochs" => t.max_epochs = parse_value(line, key, value)?,
            "seed" => {
                let seed = parse_value(line, key, value)?;
                t.seed = seed;
                self.split.seed = seed;
            }
            "initial_lr" => t.initial_lr = parse_value(line, key, value)?,
            "lr_patience" => t.lr_patience = parse_value(line, key, value)?,
            "lr_factor" => t.lr_factor = parse_value(line, key, value)?,
            "min_lr" => t.min_lr = parse_value(line, key, value)?,
            "stop_patience" => t.stop_patience = parse_value(line, key, value)?,
            "train_fraction" => self.split.train_fraction = parse_value(line, key, value)?,
            "val_fraction" => self.split.val_fraction = parse_value(line, key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.frame.validate().map_err(|e| invalid(&e))?;
        self.model.validate().map_err(|e| invalid(&e))?;
        self.split.validate().map_err(|e| invalid(&e))?;
        let mut train = self.train.clone();
        train.frame = self.frame;
        train.validate().map_err(|e| invalid(&e))
    }

    /// The seed used for model initialization and all training randomness.
    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    /// Training config with this run's framing applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            frame: self.frame,
            ..self.train.clone()
        }
    }

    /// Canonical text form listing every key; parses back to `self`.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let t = &self.train;
        let dense: Vec<String> = m.dense_units.iter().map(usize::to_string).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("frame_ms", self.frame.frame_ms.to_string()),
            ("overlap_ms", self.frame.overlap_ms.to_string()),
            ("window", self.frame.window_kind.to_string()),
            ("frame_features", m.frame_features.to_string()),
            ("conv1_filters", m.conv_stack1.filters.to_string()),
            ("conv1_kernel", m.conv_stack1.kernel_size.to_string()),
            ("conv1_layers", m.conv_stack1.layers.to_string()),
            ("pool1", m.pool1.to_string()),
            ("conv2_filters", m.conv_stack2.filters.to_string()),
            ("conv2_kernel", m.conv_stack2.kernel_size.to_string()),
            ("conv2_layers", m.conv_stack2.layers.to_string()),
            ("pool2", m.pool2.to_string()),
            ("lstm_units", m.lstm_units.to_string()),
            ("lstm_input_dropout", m.lstm_input_dropout.to_string()),
            ("lstm_recurrent_dropout", m.lstm_recurrent_dropout.to_string()),
            ("dense_units", dense.join(",")),
            ("output_classes", m.output_classes.to_string()),
            ("max_epochs", t.max_epochs.to_string()),
            ("seed", t.seed.to_string()),
            ("initial_lr", t.initial_lr.to_string()),
            ("lr_patience", t.lr_patience.to_string()),
            ("lr_factor", t.lr_factor.to_string()),
            ("min_lr", t.min_lr.to_string()),
            ("stop_patience", t.stop_patience.to_string()),
            ("train_fraction", self.split.train_fraction.to_string()),
            ("val_fraction", self.split.val_fraction.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_reference() {
        let cfg = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.model.frame_features, 3200);
        assert_eq!(cfg.train.initial_lr, 6e-5);
        assert_eq!(cfg.train.max_epochs, 34);
    }

    #[test]
    fn overrides_and_comments() {
        let cfg = RunConfig::parse("max_epochs = 3  # short\nseed=9\ndense_units = 8, 4\nwindow = rectangular\n").unwrap();
        assert_eq!(cfg.train.max_epochs, 3);
        assert_eq!((cfg.train.seed, cfg.split.seed), (9, 9));
        assert_eq!(cfg.model.dense_units, vec![8, 4]);
        assert_eq!(cfg.frame.window_kind, WindowKind::Rectangular);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("colour = red"), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(RunConfig::parse("max_epochs"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(RunConfig::parse("max_epochs = many"), Err(ConfigError::Parse { .. })));
        assert!(matches!(RunConfig::parse("max_epochs = 0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::parse("train_fraction = 0.9\nval_fraction = 0.2"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::desk_scale();
        cfg.train.seed = 11;
        cfg.split.seed = 11;
        cfg.train.initial_lr = 1e-3;
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
