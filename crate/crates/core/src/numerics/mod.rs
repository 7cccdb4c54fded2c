//! Dense tensors, reverse-mode differentiation, layers and the optimizer.

mod checkpoint;
pub mod gradcheck;
mod layers;
mod params;
mod rmsprop;
mod tape;
mod tensor;

use thiserror::Error;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{dropout, dropout_mask, Activation, Dense, LstmCell};
pub use params::{glorot_uniform, Bound, ParamId, ParamStore};
pub use rmsprop::{clip_global_norm, global_norm, RmspropConfig, RmspropState};
pub use tape::{hard_sigmoid, sigmoid, softmax, Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape {shape:?} does not hold {len} values")]
    BadShape { shape: Vec<usize>, len: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("{0}: empty input")]
    EmptyInput(&'static str),
    #[error("{op}: index {index} out of range for {len}")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
    #[error("invalid {name}: {value}")]
    InvalidHyperparameter { name: &'static str, value: f64 },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}
