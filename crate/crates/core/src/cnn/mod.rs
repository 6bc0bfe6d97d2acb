//! From-scratch convolutional network: tanh convolutions, trainable tanh
//! subsampling, a sigmoid output layer, half-RMSE loss and backpropagation.

mod checkpoint;
mod layers;
mod loss;
mod network;
mod params;
mod train;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT};
pub use layers::{ConvLayer, DenseOutputLayer, MapShape, SubsampleLayer};
pub use loss::{loss, loss_with_grad};
pub use network::{Architecture, Network, Stage, StageShapes, StageSpec};
pub use params::{Layout, ParamKind, ParamVector, Segment};
pub use train::{
    accuracy, backprop_grads, loss_and_grads, predict, sgd_epoch, sgd_step, LossAndGrad,
};

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("subsampling needs even spatial dimensions, got {rows}x{cols}")]
    OddSpatialSize { rows: usize, cols: usize },
    #[error("parameter layout mismatch: expected {expected} values, found {found}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("loss needs at least one sample")]
    EmptyBatch,
    #[error("learning rate must be finite and non-negative, got {0}")]
    InvalidLearningRate(f64),
    #[error("training diverged (loss {loss})")]
    Diverged { loss: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
