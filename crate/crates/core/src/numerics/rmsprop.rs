use serde::{Deserialize, Serialize};

use super::{NumericsError, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmspropConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmspropConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

impl RmspropConfig {
    pub fn validate(&self) -> Result<(), NumericsError> {
        let bad = |name, value| Err(NumericsError::InvalidHyperparameter { name, value });
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate", self.learning_rate);
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho", self.rho);
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", self.epsilon);
        }
        Ok(())
    }
}

/// Per-parameter running mean of squared gradients.
#[derive(Debug, Clone)]
pub struct RmspropState {
    pub config: RmspropConfig,
    mean_square: Vec<Vec<f64>>,
}

impl RmspropState {
    pub fn new(config: RmspropConfig, params: &ParamStore) -> Result<Self, NumericsError> {
        config.validate()?;
        let mean_square = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Ok(Self { config, mean_square })
    }

    pub fn mean_square(&self) -> &[Vec<f64>] {
        &self.mean_square
    }

    /// `ms <- rho ms + (1 - rho) g^2; p <- p - lr g / (sqrt(ms) + eps)`.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Vec<f64>]) -> Result<(), NumericsError> {
        if grads.len() != self.mean_square.len() || params.len() != grads.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "rmsprop",
                left: vec![params.len()],
                right: vec![grads.len()],
            });
        }
        for ((p, g), ms) in params.tensors().iter().zip(grads).zip(&self.mean_square) {
            if p.len() != g.len() || ms.len() != g.len() {
                return Err(NumericsError::ShapeMismatch {
                    op: "rmsprop",
                    left: p.shape().to_vec(),
                    right: vec![g.len()],
                });
            }
        }
        let RmspropConfig {
            learning_rate: lr,
            rho,
            epsilon,
        } = self.config;
        for ((p, g), ms) in params.tensors_mut().iter_mut().zip(grads).zip(&mut self.mean_square) {
            for ((p, &g), m) in p.data_mut().iter_mut().zip(g).zip(ms.iter_mut()) {
                *m = rho * *m + (1.0 - rho) * g * g;
                *p -= lr * g / (m.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

pub fn global_norm(grads: &[Vec<f64>]) -> f64 {
    grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= k);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("p", Tensor::vector(vec![v]));
        s
    }

    #[test]
    fn first_step_size() {
        let mut s = store(0.0);
        let mut opt = RmspropState::new(RmspropConfig::default(), &s).unwrap();
        opt.step(&mut s, &[vec![1.0]]).unwrap();
        let dp = s.tensors()[0].item();
        let expected = -0.001 / (0.1f64.sqrt() + 1e-8);
        assert!((dp - expected).abs() < 1e-15);
        assert!((dp + 3.1623e-3).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_decays_accumulator_only() {
        let mut s = store(2.5);
        let mut opt = RmspropState::new(RmspropConfig::default(), &s).unwrap();
        opt.step(&mut s, &[vec![3.0]]).unwrap();
        let before = s.tensors()[0].item();
        let ms = opt.mean_square()[0][0];
        opt.step(&mut s, &[vec![0.0]]).unwrap();
        assert_eq!(s.tensors()[0].item(), before);
        assert!((opt.mean_square()[0][0] - 0.9 * ms).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let mut s = store(0.0);
        let mut opt = RmspropState::new(RmspropConfig::default(), &s).unwrap();
        let mut prev = 0.0;
        let mut dp = 0.0;
        for _ in 0..500 {
            opt.step(&mut s, &[vec![0.7]]).unwrap();
            let now = s.tensors()[0].item();
            dp = now - prev;
            prev = now;
        }
        assert!((dp.abs() - 0.001).abs() < 1e-9, "{dp}");
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut s = store(0.0);
        let mut opt = RmspropState::new(RmspropConfig::default(), &s).unwrap();
        assert!(opt.step(&mut s, &[vec![1.0, 2.0]]).is_err());
        assert!(opt.step(&mut s, &[]).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let s = store(0.0);
        for cfg in [
            RmspropConfig { rho: 1.0, ..Default::default() },
            RmspropConfig { epsilon: 0.0, ..Default::default() },
            RmspropConfig { learning_rate: -1.0, ..Default::default() },
        ] {
            assert!(RmspropState::new(cfg, &s).is_err());
        }
    }

    #[test]
    fn clipping() {
        let mut g = vec![vec![3.0], vec![4.0]];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((global_norm(&g) - 1.0).abs() < 1e-15);
        let mut small = vec![vec![0.1]];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small, vec![vec![0.1]]);
    }
}
