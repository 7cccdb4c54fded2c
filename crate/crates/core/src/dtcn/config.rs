use serde::{Deserialize, Serialize};

use super::DtcnError;
use crate::numerics::{Activation, RmspropConfig};

/// Architecture and loss hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Widths of the two hidden layers of each embedding stream.
    pub stream_hidden: [usize; 2],
    /// Output width of each stream; the joint embedding is twice this.
    pub stream_output: usize,
    pub lstm_hidden: usize,
    pub head_hidden: usize,
    pub dropout: f64,
    pub lambda_emb: f64,
    pub eps_clamp: f64,
    pub gate_activation: Activation,
    pub candidate_activation: Activation,
    /// One LSTM for both context streams instead of one each.
    pub share_lstm: bool,
    /// Append each context item's standardized popularity to its LSTM input.
    pub context_popularity: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            stream_hidden: [256, 32],
            stream_output: 32,
            lstm_hidden: 64,
            head_hidden: 32,
            dropout: 0.5,
            lambda_emb: 0.1,
            eps_clamp: 1e-3,
            gate_activation: Activation::HardSigmoid,
            candidate_activation: Activation::Tanh,
            share_lstm: false,
            context_popularity: true,
        }
    }
}

impl ModelConfig {
    pub fn embedding_dim(&self) -> usize {
        2 * self.stream_output
    }

    pub fn lstm_input(&self) -> usize {
        self.embedding_dim() + usize::from(self.context_popularity)
    }

    pub fn validate(&self) -> Result<(), DtcnError> {
        let fail = |m: &str| Err(DtcnError::Config(m.to_string()));
        if self.stream_hidden.contains(&0) || self.stream_output == 0 || self.lstm_hidden == 0 || self.head_hidden == 0 {
            return fail("layer widths must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must be in [0, 1)");
        }
        if !(self.lambda_emb >= 0.0 && self.lambda_emb.is_finite()) {
            return fail("lambda_emb must be non-negative");
        }
        if !(self.eps_clamp > 0.0 && self.eps_clamp <= 1.0) {
            return fail("eps_clamp must be in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without a lower train loss; 0 disables.
    pub patience: usize,
    /// Global-norm gradient clip; 0 disables.
    pub clip_norm: f64,
    pub optimizer: RmspropConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            patience: 10,
            clip_norm: 5.0,
            optimizer: RmspropConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DtcnError> {
        if self.batch_size == 0 {
            return Err(DtcnError::Config("batch_size must be positive".into()));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(DtcnError::Config("clip_norm must be non-negative".into()));
        }
        self.optimizer.validate()?;
        Ok(())
    }
}
