//! Central finite differences against backpropagated gradients.

use aeroadapt::nn::{Matrix, ModelConfig, ModelParams, Target, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> aeroadapt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for task in [Task::Regression, Task::Classification] {
        let cfg = ModelConfig {
            input_dim: 4,
            hidden_dim: 6,
            attention_dim: 5,
            task,
            ..ModelConfig::default()
        };
        let params = ModelParams::init(cfg.clone(), &mut rng)?;
        let inputs = Matrix::from_vec(10, 4, (0..40).map(|_| rng.random::<f64>()).collect());
        let reg: Vec<f64> = (0..cfg.output_dim()).map(|_| rng.random()).collect();
        let cls: Vec<u8> = (0..cfg.horizons).flat_map(|_| [1, 0, 1]).collect();
        let target = match task {
            Task::Regression => Target::Regression(&reg),
            Task::Classification => Target::Classification(&cls),
        };
        let (_, grads) = params.loss_and_gradient(&inputs, target, None)?;

        let delta = 1e-5;
        let mut worst: f64 = 0.0;
        let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.data().to_vec()).collect();
        for (k, g) in analytic.iter().enumerate() {
            for i in 0..g.len() {
                let mut plus = params.clone();
                plus.tensors_mut()[k].data_mut()[i] += delta;
                let mut minus = params.clone();
                minus.tensors_mut()[k].data_mut()[i] -= delta;
                let lp = plus.loss_and_gradient(&inputs, target, None)?.0;
                let lm = minus.loss_and_gradient(&inputs, target, None)?.0;
                let numeric = (lp - lm) / (2.0 * delta);
                let rel = (numeric - g[i]).abs() / numeric.abs().max(g[i].abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
        println!("{task:?}: {} parameters, worst relative error {worst:.2e}", params.parameter_count());
    }
    Ok(())
}
