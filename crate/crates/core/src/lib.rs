//! Voice pathology detection from raw audio with a CNN + LSTM network.
//!
//! The pipeline reads 16-bit PCM WAV recordings, windows them into
//! overlapping Hamming frames, and classifies each file as pathological or
//! healthy. Everything needed for training is implemented here: a small
//! dense-tensor engine with exact gradients, Adam with a reduce-on-plateau
//! schedule, early stopping, balanced dataset splitting and classification
//! reports.

pub mod architecture;
pub mod audio;
pub mod config;
pub mod dataset;
pub mod evaluation;
mod label;
pub mod nn;
pub mod optim;
pub mod trainer;

pub use label::Label;
