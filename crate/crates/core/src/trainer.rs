//! Batch-size-1 training loop with validation, LR plateau, early stopping
//! and best-by-validation-loss checkpointing.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::architecture::{predict_file, Prediction};
use crate::audio::{read_wav, segment, AudioError, FrameConfig, SegmentMatrix};
use crate::evaluation::ConfusionMatrix;
use crate::label::Label;
use crate::nn::{save_checkpoint, Mode, Model, NnError, Rng};
use crate::optim::{adam_step, cross_entropy, softmax_cross_entropy_grad, AdamState, OptimError, ScheduleState, StopDecision};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{file}: {source}")]
    Audio {
        file: String,
        #[source]
        source: AudioError,
    },
    #[error("{file}: {source}")]
    Engine {
        file: String,
        #[source]
        source: NnError,
    },
    #[error("{file}: {source}")]
    Optim {
        file: String,
        #[source]
        source: OptimError,
    },
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint {path}: {source}")]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: NnError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub seed: u64,
    pub initial_lr: f64,
    pub lr_patience: usize,
    pub lr_factor: f64,
    pub min_lr: f64,
    pub stop_patience: usize,
    pub frame: FrameConfig,
    pub checkpoint_path: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 34,
            seed: 0,
            initial_lr: 6e-5,
            lr_patience: 8,
            lr_factor: 0.5,
            min_lr: 1e-7,
            stop_patience: 20,
            frame: FrameConfig::default(),
            checkpoint_path: None,
            log_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        if !(self.initial_lr > 0.0 && self.min_lr > 0.0 && self.min_lr <= self.initial_lr) {
            return bad("need 0 < min_lr <= initial_lr");
        }
        if self.lr_patience == 0 || self.stop_patience == 0 {
            return bad("patience values must be >= 1");
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return bad("lr_factor must lie in (0, 1)");
        }
        self.frame
            .validate()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub learning_rate: f64,
    pub seconds: f64,
}

impl EpochLog {
    /// Equality on every field except wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.train_loss.to_bits() == other.train_loss.to_bits()
            && self.train_accuracy.to_bits() == other.train_accuracy.to_bits()
            && self.val_loss.to_bits() == other.val_loss.to_bits()
            && self.val_accuracy.to_bits() == other.val_accuracy.to_bits()
            && self.learning_rate.to_bits() == other.learning_rate.to_bits()
    }
}

/// Written next to the checkpoint as `<checkpoint>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub train_config: TrainConfig,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Samples per segment the model was trained on.
    pub frame_features: usize,
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_sidecar(checkpoint: &Path) -> Result<Sidecar, TrainError> {
    let path = sidecar_path(checkpoint);
    let bytes = std::fs::read(&path).map_err(|source| TrainError::Io { path: path.clone(), source })?;
    serde_json::from_slice(&bytes).map_err(|e| TrainError::Io {
        path,
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}

/// A file to train or evaluate on, already windowed.
#[derive(Debug, Clone)]
pub struct LabeledSegments {
    pub name: String,
    pub label: Label,
    pub segments: SegmentMatrix,
}

/// Reads and segments each `(path, label)` pair.
pub fn load_segments<P: AsRef<Path>>(files: &[(P, Label)], frame: &FrameConfig) -> Result<Vec<LabeledSegments>, TrainError> {
    files
        .iter()
        .map(|(path, label)| {
            let name = path.as_ref().display().to_string();
            let wrap = |source| TrainError::Audio { file: name.clone(), source };
            let signal = read_wav(path).map_err(wrap)?;
            let segments = segment(&signal, frame).map_err(wrap)?;
            Ok(LabeledSegments {
                name: name.clone(),
                label: *label,
                segments,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SplitEvaluation {
    pub mean_loss: f64,
    pub matrix: ConfusionMatrix,
    pub predictions: Vec<Prediction>,
}

impl SplitEvaluation {
    pub fn accuracy(&self) -> f64 {
        self.matrix.correct() as f64 / self.matrix.total() as f64
    }
}

/// Inference over a file list; per-file results kept in input order.
pub fn evaluate_split(model: &Model, files: &[LabeledSegments]) -> Result<SplitEvaluation, TrainError> {
    if files.is_empty() {
        return Err(TrainError::EmptySet("evaluation"));
    }
    let mut matrix = ConfusionMatrix::default();
    let mut total_loss = 0.0;
    let mut predictions = Vec::with_capacity(files.len());
    for f in files {
        let pred = predict_file(model, &f.segments).map_err(|source| TrainError::Engine {
            file: f.name.clone(),
            source,
        })?;
        total_loss += cross_entropy(&pred.probabilities, &f.label.one_hot()).map_err(|source| TrainError::Optim {
            file: f.name.clone(),
            source,
        })?;
        matrix.record(f.label, pred.label);
        predictions.push(pred);
    }
    Ok(SplitEvaluation {
        mean_loss: total_loss / files.len() as f64,
        matrix,
        predictions,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: Model,
    pub logs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub adam_steps: u64,
}

/// One forward/backward/Adam update on a single file; returns loss and training-pass prediction.
fn train_step(
    model: &mut Model,
    file: &LabeledSegments,
    adam: &mut AdamState,
    rng: &mut Rng,
) -> Result<(f64, Label), TrainError> {
    let engine = |source| TrainError::Engine {
        file: file.name.clone(),
        source,
    };
    let optim = |source| TrainError::Optim {
        file: file.name.clone(),
        source,
    };
    let target = file.label.one_hot();
    let pass = model.forward(&file.segments, Mode::Training(rng)).map_err(engine)?;
    let loss = cross_entropy(&pass.probabilities, &target).map_err(optim)?;
    let grad_logits = softmax_cross_entropy_grad(&pass.probabilities, &target).map_err(optim)?;
    let grads = model.backward(&pass, &grad_logits).map_err(engine)?;
    adam_step(&mut model.parameters_mut(), &grads, adam).map_err(optim)?;
    let predicted = Prediction::from_probabilities([pass.probabilities[0], pass.probabilities[1]]).label;
    Ok((loss, predicted))
}

fn save_best(model: &Model, path: &Path, sidecar: &Sidecar) -> Result<(), TrainError> {
    let tmp = path.with_extension("tmp");
    save_checkpoint(model, &tmp).map_err(|source| TrainError::Checkpoint {
        path: tmp.clone(),
        source,
    })?;
    std::fs::rename(&tmp, path).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let side = sidecar_path(path);
    let json = serde_json::to_vec_pretty(sidecar).expect("sidecar serializes");
    std::fs::write(&side, json).map_err(|source| TrainError::Io { path: side, source })
}

/// Trains on pre-segmented files.
///
/// Each epoch reshuffles the training order, takes one Adam step per file,
/// then scores the whole validation set with dropout off. The learning rate
/// follows validation accuracy; stopping follows validation loss.
pub fn train_segmented(
    model: Model,
    train_files: &[LabeledSegments],
    val_files: &[LabeledSegments],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    train_segmented_with(model, train_files, val_files, cfg, |_| ControlFlow::Continue(()))
}

/// [`train_segmented`] with a callback after every epoch's log entry is
/// written; returning `ControlFlow::Break` ends training after that epoch.
pub fn train_segmented_with(
    mut model: Model,
    train_files: &[LabeledSegments],
    val_files: &[LabeledSegments],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog) -> ControlFlow<()>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train_files.is_empty() {
        return Err(TrainError::EmptySet("training"));
    }
    if val_files.is_empty() {
        return Err(TrainError::EmptySet("validation"));
    }
    let frame_features = train_files[0].segments.cols;

    let root = Rng::new(cfg.seed);
    let mut order_rng = root.derive(1);
    let mut dropout_rng = root.derive(2);
    let mut adam = AdamState::new(model.parameters(), cfg.initial_lr);
    let mut schedule = ScheduleState::new(cfg.lr_patience, cfg.lr_factor, cfg.min_lr, cfg.stop_patience);

    let mut log_writer = match &cfg.log_path {
        Some(path) => Some(BufWriter::new(File::create(path).map_err(|source| TrainError::Io {
            path: path.clone(),
            source,
        })?)),
        None => None,
    };

    let mut logs = Vec::new();
    let mut best: Option<(Model, f64, usize)> = None;
    let mut order: Vec<usize> = (0..train_files.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for &i in &order {
            let file = &train_files[i];
            let (loss, predicted) = train_step(&mut model, file, &mut adam, &mut dropout_rng)?;
            loss_sum += loss;
            correct += usize::from(predicted == file.label);
        }
        let val = evaluate_split(&model, val_files)?;
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / train_files.len() as f64,
            train_accuracy: correct as f64 / train_files.len() as f64,
            val_loss: val.mean_loss,
            val_accuracy: val.accuracy(),
            learning_rate: adam.learning_rate,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train loss {:.4} acc {:.4} | val loss {:.4} acc {:.4} | lr {:.3e}",
            entry.train_loss,
            entry.train_accuracy,
            entry.val_loss,
            entry.val_accuracy,
            entry.learning_rate
        );

        if best.as_ref().is_none_or(|(_, loss, _)| entry.val_loss < *loss) {
            if let Some(path) = &cfg.checkpoint_path {
                let sidecar = Sidecar {
                    train_config: cfg.clone(),
                    best_epoch: epoch,
                    best_val_loss: entry.val_loss,
                    frame_features,
                };
                save_best(&model, path, &sidecar)?;
            }
            best = Some((model.clone(), entry.val_loss, epoch));
        }
        if let (Some(w), Some(path)) = (log_writer.as_mut(), &cfg.log_path) {
            let line = serde_json::to_string(&entry).expect("epoch log serializes");
            writeln!(w, "{line}")
                .and_then(|_| w.flush())
                .map_err(|source| TrainError::Io { path: path.clone(), source })?;
        }

        adam.learning_rate = schedule.plateau_update(entry.val_accuracy, adam.learning_rate);
        let decision = schedule.early_stop_update(entry.val_loss);
        let flow = on_epoch(&entry);
        logs.push(entry);
        if decision == StopDecision::Stop {
            log::info!("early stop after epoch {epoch}");
            break;
        }
        if flow.is_break() {
            log::info!("stopped by caller after epoch {epoch}");
            break;
        }
    }
    let (model, _, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        logs,
        best_epoch,
        adam_steps: adam.t,
    })
}

/// Segments the given files once, then runs [`train_segmented`].
pub fn train<P: AsRef<Path>>(
    model: Model,
    train_files: &[(P, Label)],
    val_files: &[(P, Label)],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if train_files.is_empty() {
        return Err(TrainError::EmptySet("training"));
    }
    if val_files.is_empty() {
        return Err(TrainError::EmptySet("validation"));
    }
    let train_set = load_segments(train_files, &cfg.frame)?;
    let val_set = load_segments(val_files, &cfg.frame)?;
    train_segmented(model, &train_set, &val_set, cfg)
}
