#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pathovox::architecture::{ConvStack, ModelConfig};
use pathovox::audio::FrameConfig;
use pathovox::dataset::{generate_synthetic_corpus, SynthSpec};
use pathovox::trainer::{load_segments, LabeledSegments};
use pathovox::Label;

/// A model small enough for sub-second epochs on 8 kHz synthetic audio.
pub fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        frame_features: 512,
        conv_stack1: ConvStack {
            filters: 2,
            kernel_size: 5,
            layers: 1,
        },
        pool1: 4,
        conv_stack2: ConvStack {
            filters: 2,
            kernel_size: 5,
            layers: 1,
        },
        pool2: 4,
        lstm_units: 3,
        dense_units: vec![4, 4],
        ..ModelConfig::default()
    }
}

/// Writes `n` files per class into `dir` and returns them healthy-first.
pub fn synthetic_files(dir: &Path, n: usize, seed: u64) -> Vec<(PathBuf, Label)> {
    let spec = SynthSpec {
        n_healthy: n,
        n_pathological: n,
        seed,
        ..SynthSpec::default()
    };
    let manifest = generate_synthetic_corpus(&spec, dir).unwrap();
    manifest.entries.iter().map(|e| (manifest.resolve(e), e.label)).collect()
}

/// Segments `files[range]` of each class, alternating classes.
pub fn segmented(files: &[(PathBuf, Label)], range: std::ops::Range<usize>) -> Vec<LabeledSegments> {
    let per_class = files.len() / 2;
    let picked: Vec<(PathBuf, Label)> = range
        .flat_map(|i| [files[i].clone(), files[per_class + i].clone()])
        .collect();
    load_segments(&picked, &FrameConfig::default()).unwrap()
}
