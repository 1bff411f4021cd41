//! Train the attention BiLSTM regressor and score it on the test split.

use aeroadapt::checkpoint::{Forecaster, Predictor};
use aeroadapt::features::FeatureSchema;
use aeroadapt::impute::MiceConfig;
use aeroadapt::ingest::{generate_synthetic, SyntheticConfig};
use aeroadapt::nn::{ModelConfig, Task};
use aeroadapt::pipeline::{evaluate_regression, prepare, train, TrainConfig};

fn main() -> aeroadapt::Result<()> {
    let (masked, _) = generate_synthetic(&SyntheticConfig {
        n_hours: 24 * 45,
        missing_rate: 0.05,
        seed: 3,
        ..SyntheticConfig::default()
    })?;
    let schema = FeatureSchema::all_fields();
    let data = prepare(&masked, &schema, &MiceConfig::default())?;
    let model_cfg = ModelConfig {
        input_dim: schema.input_dim(),
        hidden_dim: 16,
        attention_dim: 8,
        task: Task::Regression,
        ..ModelConfig::default()
    };
    let train_cfg = TrainConfig {
        max_epochs: 15,
        patience: Some(5),
        seed: 3,
        ..TrainConfig::default()
    };
    let (params, history) = train(model_cfg, data.train(), data.val(), &train_cfg)?;
    for r in &history.records {
        println!("epoch {:>3}  train {:.5}  val {:.5}", r.epoch, r.train_loss, r.val_loss);
    }
    println!("best epoch {}", history.best_epoch);

    let weights = params.attention_weights(&data.test()[0].inputs)?.unwrap();
    let peak = weights.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    println!("attention peaks at window step {peak} of {}", weights.len());

    let model = Forecaster {
        predictor: Predictor::Network(params),
        schema,
        normalizer: data.normalizer.clone(),
        imputer: data.imputer.clone(),
    };
    let report = evaluate_regression(&model, data.test())?;
    for e in &report.entries {
        let r = e.regression.as_ref().unwrap();
        println!("{:>5} +{:>2}h  rmse {:7.3}", e.pollutant.column_name(), e.horizon_hours, r.rmse);
    }
    Ok(())
}
