//! The prediction network: joint embedding, per-context LSTMs with temporal
//! attention, regression head and training loop.

mod attention;
mod config;
mod data;
pub mod micro;
mod model;
mod train;

use thiserror::Error;

pub use attention::{attention_score, attention_weights, temporal_attention, weights_from_scores, AttentionResult};
pub use config::{ModelConfig, TrainConfig};
pub use data::{ContextSpecs, PreparedData};
pub use model::{embedding_loss, signed_log, DtcnModel, Scalers};
pub use train::{predict, train, Prediction, TrainReport};

use crate::context::ContextError;
use crate::dataset::DatasetError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum DtcnError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("{what}: expected length {expected}, got {got}")]
    InputLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty context")]
    EmptyContext,
    #[error("no training targets")]
    EmptyTrainSet,
    #[error("record index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("training diverged at epoch {epoch}, batch {batch}: {source}")]
    Diverged {
        epoch: usize,
        batch: usize,
        #[source]
        source: NumericsError,
    },
    #[error("model config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
