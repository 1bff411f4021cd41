//! Additive attention over a hidden sequence.
//!
//! Each step `e_i` is scored by a one-hidden-layer feed-forward network,
//! `z_i = v · tanh(W e_i + b)`, the scores are softmax-normalised into
//! weights and the context is `Σ w_i e_i`. A scalar output bias would cancel
//! in the softmax, so the score network has none.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{softmax, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    /// `A × D` projection of each hidden state.
    pub w: Matrix,
    pub b: Matrix,
    /// `1 × A` scoring vector.
    pub v: Matrix,
}

#[derive(Debug, Clone)]
pub struct AttentionTrace {
    projected: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl AttentionParams {
    pub fn zeros(dim: usize, attention_dim: usize) -> Self {
        AttentionParams {
            w: Matrix::zeros(attention_dim, dim),
            b: Matrix::zeros(attention_dim, 1),
            v: Matrix::zeros(1, attention_dim),
        }
    }

    pub fn init<R: Rng + ?Sized>(dim: usize, attention_dim: usize, rng: &mut R) -> Self {
        AttentionParams {
            w: Matrix::glorot(attention_dim, dim, dim, attention_dim, rng),
            b: Matrix::zeros(attention_dim, 1),
            v: Matrix::glorot(1, attention_dim, attention_dim, 1, rng),
        }
    }

    pub fn score(&self, e: &[f64]) -> (f64, Vec<f64>) {
        let mut u = self.b.data().to_vec();
        self.w.matvec_acc(e, &mut u);
        u.iter_mut().for_each(|x| *x = x.tanh());
        let z = u.iter().zip(self.v.data()).map(|(a, b)| a * b).sum();
        (z, u)
    }

    pub fn forward_traced(&self, seq: &Matrix) -> (Vec<f64>, AttentionTrace) {
        let mut scores = Vec::with_capacity(seq.rows());
        let mut projected = Vec::with_capacity(seq.rows());
        for t in 0..seq.rows() {
            let (z, u) = self.score(seq.row(t));
            scores.push(z);
            projected.push(u);
        }
        let weights = softmax(&scores);
        let context = weighted_sum(seq, &weights);
        (context, AttentionTrace { projected, weights })
    }

    /// Gradient with respect to the sequence, covering both the value path
    /// (through `w_i e_i`) and the score path (through `z_i`).
    pub fn backward(
        &self,
        seq: &Matrix,
        trace: &AttentionTrace,
        d_context: &[f64],
        grads: &mut AttentionParams,
    ) -> Matrix {
        let steps = seq.rows();
        let mut d_seq = Matrix::zeros(steps, seq.cols());
        let dw: Vec<f64> = (0..steps)
            .map(|t| seq.row(t).iter().zip(d_context).map(|(e, d)| e * d).sum())
            .collect();
        let mean: f64 = trace.weights.iter().zip(&dw).map(|(w, d)| w * d).sum();
        let mut d_pre = vec![0.0; self.w.rows()];
        for t in 0..steps {
            let w_t = trace.weights[t];
            for (ds, d) in d_seq.row_mut(t).iter_mut().zip(d_context) {
                *ds += w_t * d;
            }
            let dz = w_t * (dw[t] - mean);
            let u = &trace.projected[t];
            for ((gv, u_k), (dp, v_k)) in grads
                .v
                .data_mut()
                .iter_mut()
                .zip(u)
                .zip(d_pre.iter_mut().zip(self.v.data()))
            {
                *gv += dz * u_k;
                *dp = dz * v_k * (1.0 - u_k * u_k);
            }
            grads.w.outer_acc(&d_pre, seq.row(t));
            for (gb, dp) in grads.b.data_mut().iter_mut().zip(&d_pre) {
                *gb += dp;
            }
            self.w.matvec_t_acc(&d_pre, d_seq.row_mut(t));
        }
        d_seq
    }
}

fn weighted_sum(seq: &Matrix, weights: &[f64]) -> Vec<f64> {
    let mut context = vec![0.0; seq.cols()];
    for (t, w) in weights.iter().enumerate() {
        for (c, e) in context.iter_mut().zip(seq.row(t)) {
            *c += w * e;
        }
    }
    context
}

/// Context vector and attention weights for a hidden sequence `e_1 … e_E`.
pub fn attention_forward(seq: &Matrix, params: &AttentionParams) -> (Vec<f64>, Vec<f64>) {
    let (context, trace) = params.forward_traced(seq);
    (context, trace.weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, steps: usize, dim: usize) -> Matrix {
        Matrix::from_vec(steps, dim, (0..steps * dim).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn identical_steps_get_uniform_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = AttentionParams::init(4, 5, &mut rng);
        let row = vec![0.3, -0.2, 0.9, 0.1];
        let seq = Matrix::from_rows(&[row.clone(), row.clone(), row.clone()]);
        let (c, w) = attention_forward(&seq, &p);
        for wi in &w {
            assert!((wi - 1.0 / 3.0).abs() < 1e-12);
        }
        for (ci, ri) in c.iter().zip(&row) {
            assert!((ci - ri).abs() < 1e-12);
        }
    }

    #[test]
    fn single_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = AttentionParams::init(3, 2, &mut rng);
        let seq = random_seq(&mut rng, 1, 3);
        let (c, w) = attention_forward(&seq, &p);
        assert_eq!(w, vec![1.0]);
        assert_eq!(c, seq.row(0).to_vec());
    }

    proptest! {
        #[test]
        fn weights_are_a_distribution(seed in 0u64..500, steps in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = AttentionParams::init(6, 4, &mut rng);
            let seq = random_seq(&mut rng, steps, 6);
            let (_, w) = attention_forward(&seq, &p);
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn softmax_shift_invariance(z in proptest::collection::vec(-20.0f64..20.0, 1..20), k in -100.0f64..100.0) {
            let a = softmax(&z);
            let shifted: Vec<f64> = z.iter().map(|v| v + k).collect();
            let b = softmax(&shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
