//! Save a forecaster, load it back and compare forecasts.

use aeroadapt::checkpoint::{Forecaster, Predictor};
use aeroadapt::features::FeatureSchema;
use aeroadapt::impute::MiceConfig;
use aeroadapt::ingest::{generate_synthetic, SyntheticConfig};
use aeroadapt::nn::{ModelConfig, ModelParams, Task};
use aeroadapt::pipeline::prepare;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> aeroadapt::Result<()> {
    let (masked, _) = generate_synthetic(&SyntheticConfig {
        n_hours: 24 * 20,
        missing_rate: 0.1,
        seed: 6,
        ..SyntheticConfig::default()
    })?;
    let schema = FeatureSchema::all_fields();
    let data = prepare(&masked, &schema, &MiceConfig::default())?;
    let cfg = ModelConfig {
        input_dim: schema.input_dim(),
        hidden_dim: 8,
        attention_dim: 4,
        task: Task::Regression,
        ..ModelConfig::default()
    };
    let params = ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(6))?;
    let model = Forecaster {
        predictor: Predictor::Network(params),
        schema,
        normalizer: data.normalizer.clone(),
        imputer: data.imputer.clone(),
    };
    let path = std::env::temp_dir().join("aeroadapt_example.ckpt");
    model.save(&path)?;
    let loaded = Forecaster::load(&path)?;
    println!("{} bytes, {}", std::fs::metadata(&path)?.len(), loaded.predictor.kind_name());

    let recent = masked.slice(masked.len() - 24, masked.len());
    let a = model.forecast(&recent)?;
    let b = loaded.forecast(&recent)?;
    let max_diff = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x.concentration.unwrap() - y.concentration.unwrap()).abs())
        .fold(0.0, f64::max);
    println!("max forecast difference after reload: {max_diff:e}");
    Ok(())
}
