use super::DtcnError;
use crate::numerics::softmax;
use crate::timebase::{normalized_time_vector, MultiScaleTimeVector};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionResult {
    pub scores: Vec<f64>,
    pub weights: Vec<f64>,
    pub context_vector: Vec<f64>,
}

/// `1 - cos(a, b)`, clamped below at `eps`; a zero-norm vector scores 1.
pub fn attention_score(a: &[f64; 4], b: &[f64; 4], eps: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let e = if na == 0.0 || nb == 0.0 { 1.0 } else { 1.0 - dot / (na * nb) };
    e.max(eps)
}

/// Attention weights `softmax(1 / e)` from clamped scores.
pub fn weights_from_scores(scores: &[f64]) -> Vec<f64> {
    let inv: Vec<f64> = scores.iter().map(|e| 1.0 / e).collect();
    softmax(&inv)
}

/// Scores and weights over normalized time vectors. Depends on time only.
pub fn attention_weights(target: &[f64; 4], context: &[[f64; 4]], eps: f64) -> (Vec<f64>, Vec<f64>) {
    let scores: Vec<f64> = context.iter().map(|c| attention_score(target, c, eps)).collect();
    let weights = weights_from_scores(&scores);
    (scores, weights)
}

/// Attention readout `c = sum_j alpha_j h_j` over a context's hidden states.
pub fn temporal_attention(
    target: &MultiScaleTimeVector,
    context: &[MultiScaleTimeVector],
    hidden_states: &[Vec<f64>],
    eps_clamp: f64,
) -> Result<AttentionResult, DtcnError> {
    if context.is_empty() {
        return Err(DtcnError::EmptyContext);
    }
    if context.len() != hidden_states.len() {
        return Err(DtcnError::InputLength {
            what: "hidden states",
            expected: context.len(),
            got: hidden_states.len(),
        });
    }
    let dim = hidden_states[0].len();
    if let Some(h) = hidden_states.iter().find(|h| h.len() != dim) {
        return Err(DtcnError::InputLength {
            what: "hidden state",
            expected: dim,
            got: h.len(),
        });
    }
    let t = normalized_time_vector(target);
    let cs: Vec<[f64; 4]> = context.iter().map(normalized_time_vector).collect();
    let (scores, weights) = attention_weights(&t, &cs, eps_clamp);
    let mut context_vector = vec![0.0; dim];
    for (w, h) in weights.iter().zip(hidden_states) {
        for (c, v) in context_vector.iter_mut().zip(h) {
            *c += w * v;
        }
    }
    Ok(AttentionResult {
        scores,
        weights,
        context_vector,
    })
}
