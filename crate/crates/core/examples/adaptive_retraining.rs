//! Weekly retraining on a drifting stream against the frozen initial model.

use aeroadapt::checkpoint::{complete_with, Forecaster, Predictor};
use aeroadapt::features::FeatureSchema;
use aeroadapt::impute::MiceConfig;
use aeroadapt::ingest::{generate_synthetic, SyntheticConfig};
use aeroadapt::nn::{ModelConfig, Task};
use aeroadapt::pipeline::{adaptive_run, prepare, train, AdaptiveConfig, TrainConfig};

fn main() -> aeroadapt::Result<()> {
    let initial_hours = 24 * 21;
    let (masked, _) = generate_synthetic(&SyntheticConfig {
        n_hours: initial_hours + 168 * 6,
        drift_start_hour: Some(initial_hours),
        drift_slope: 0.003,
        seed: 8,
        ..SyntheticConfig::default()
    })?;
    let schema = FeatureSchema::all_fields();
    let data = prepare(&masked.slice(0, initial_hours), &schema, &MiceConfig::default())?;
    let cfg = ModelConfig {
        input_dim: schema.input_dim(),
        hidden_dim: 12,
        attention_dim: 8,
        task: Task::Regression,
        ..ModelConfig::default()
    };
    let (params, _) = train(
        cfg,
        data.train(),
        data.val(),
        &TrainConfig {
            max_epochs: 20,
            seed: 8,
            ..TrainConfig::default()
        },
    )?;
    let initial = Forecaster {
        predictor: Predictor::Network(params),
        schema: schema.clone(),
        normalizer: data.normalizer.clone(),
        imputer: data.imputer.clone(),
    };
    let required: Vec<_> = schema.input_fields();
    let stream = complete_with(&masked, initial.imputer.as_ref(), &required)?;
    let (_, report) = adaptive_run(&initial, &stream, initial_hours, &AdaptiveConfig::default(), None)?;
    for p in &report.periods {
        println!(
            "week {}  adaptive {:7.3}  frozen {:7.3}  accepted {}",
            p.period, p.adaptive_rmse, p.frozen_rmse, p.accepted
        );
    }
    println!(
        "final {} weeks: adaptive {:.3} vs frozen {:.3}, gain {:.1}%",
        report.final_periods,
        report.adaptive_final_rmse,
        report.frozen_final_rmse,
        100.0 * report.final_gain
    );
    Ok(())
}
