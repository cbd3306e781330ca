//! Corpus manifests, the class-balanced split, and the synthetic corpus.

mod manifest;
mod split;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::label::Label;

pub use manifest::{load_manifest, save_manifest, Manifest, ManifestEntry, Split};
pub use split::{make_split, split_counts, SplitCounts, SplitSpec};
pub use synth::{generate_synthetic_corpus, synthesize_pcm, SynthSpec};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("manifest row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("manifest row {row}: unknown label `{label}`")]
    UnknownLabel { row: usize, label: String },
    #[error("no {0} entries in manifest")]
    EmptyClass(Label),
    #[error("split needs {needed} {label} entries, only {available} available")]
    InsufficientHealthy { label: Label, needed: usize, available: usize },
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("invalid synthesis spec: {0}")]
    InvalidSynthSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),
}
