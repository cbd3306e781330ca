//! Dense-tensor neural network engine with hand-written backward passes.

mod activation;
pub mod checkpoint;
mod conv;
mod dense;
mod dropout;
pub mod gradcheck;
mod init;
mod layer;
mod lstm;
mod model;
mod pool;
mod rng;
mod tensor;

use thiserror::Error;

pub use activation::{sigmoid, Activation};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use conv::{conv1d_same_backward, conv1d_same_forward, ConvParams};
pub use dense::{dense_backward, dense_forward, softmax, DenseParams};
pub use dropout::{dropout_apply, dropout_mask};
pub use init::glorot_uniform_init;
pub use layer::{trainable_count, Layer, LayerSpec};
pub use lstm::{lstm_backward, lstm_forward, lstm_forward_with_masks, DropoutRates, LstmCache, LstmMasks, LstmParams};
pub use model::{ForwardPass, Mode, Model};
pub use pool::{maxpool1d, maxpool1d_backward};
pub use rng::Rng;
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("input length {len} shorter than pool size {pool}")]
    TooShort { len: usize, pool: usize },
    #[error("invalid layer: {0}")]
    InvalidSpec(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
