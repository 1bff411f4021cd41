//! Bias-corrected Adam over the parameter tensors of a network.

use serde::{Deserialize, Serialize};

use super::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams, config: AdamConfig) -> Self {
        let shapes: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data().len()]).collect();
        AdamState {
            config,
            m: shapes.clone(),
            v: shapes,
            t: 0,
        }
    }

    /// Applies one update of `grads` to `params`.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.t += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.t as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}

/// Rescales `grads` in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{ModelConfig, ModelParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> ModelParams {
        let cfg = ModelConfig {
            input_dim: 2,
            hidden_dim: 2,
            attention_dim: 2,
            horizons: 1,
            ..Default::default()
        };
        ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = tiny();
        let before = p.clone();
        let g = p.zeros_like();
        let mut adam = AdamState::new(&p, AdamConfig::default());
        adam.step(&mut p, &g);
        assert_eq!(p, before);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = tiny();
        let before = p.clone();
        let mut g = p.zeros_like();
        let grad = 0.37;
        g.head_b.data_mut()[0] = grad;
        let cfg = AdamConfig::default();
        let mut adam = AdamState::new(&p, cfg);
        adam.step(&mut p, &g);
        let delta = before.head_b.data()[0] - p.head_b.data()[0];
        let expected = cfg.learning_rate * grad / (grad + cfg.epsilon);
        assert!((delta - expected).abs() < 1e-15);
        assert!((delta - cfg.learning_rate).abs() < 1e-10);
    }

    #[test]
    fn state_depends_on_step_count() {
        let mut p = tiny();
        let mut g = p.zeros_like();
        g.head_w.data_mut()[0] = 1.0;
        let mut once = AdamState::new(&p, AdamConfig::default());
        once.step(&mut p.clone(), &g);
        let mut twice = AdamState::new(&p, AdamConfig::default());
        twice.step(&mut p, &g);
        twice.step(&mut p, &g);
        assert_ne!(once, twice);
        assert_eq!(twice.t, 2);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let p = tiny();
        let mut g = p.zeros_like();
        g.head_w.data_mut()[0] = 30.0;
        g.head_w.data_mut()[1] = 40.0;
        assert_eq!(clip_global_norm(&mut g, 5.0), 50.0);
        assert!((g.global_norm() - 5.0).abs() < 1e-12);
    }
}
