//! A small, deterministic neural engine: dense tensors, convolution, max
//! pooling, dense layers, an LSTM and inverted dropout, with hand-written
//! reverse-mode gradients and the Adam optimiser.
//!
//! Three networks are built from these pieces ([`ModelKind`]): the fused
//! CNN + LSTM classifier and the standalone CNN and LSTM classifiers.

mod adam;
mod checkpoint;
mod layers;
mod lstm;
mod model;
mod tensor;
mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint, Checkpoint};
pub use layers::{conv2d_forward, dense_forward, dropout_apply, maxpool2d, softmax, Activation};
pub use lstm::{lstm_forward, LstmWeights};
pub use model::{
    build_model, cnn_geometry, loss_and_grads, predict, CnnGeometry, CnnInput, Example, FusionModelConfig, LossOutput,
    Model, ModelKind, ModelParams, Param,
};
pub use tensor::Tensor;
pub use train::{train, EpochStats, TrainConfig, Trainer};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, NnError>;
