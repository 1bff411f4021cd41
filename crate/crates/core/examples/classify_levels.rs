//! Level bands per pollutant, then a classifier trained on level targets.

use aeroadapt::checkpoint::{Forecaster, Predictor};
use aeroadapt::domain::{classify_level, Pollutant};
use aeroadapt::features::FeatureSchema;
use aeroadapt::impute::MiceConfig;
use aeroadapt::ingest::{generate_synthetic, SyntheticConfig};
use aeroadapt::nn::{ModelConfig, Task};
use aeroadapt::pipeline::{evaluate_classification, prepare, train, TrainConfig};

fn main() -> aeroadapt::Result<()> {
    for (p, c) in [(Pollutant::Pm25, 20.0), (Pollutant::Pm25, 80.0), (Pollutant::Pm10, 300.0), (Pollutant::No2, 45.0)] {
        let level = classify_level(p, c)?;
        println!("{:>5} {c:>6.1} -> {}", p.column_name(), level.name());
    }

    let (masked, _) = generate_synthetic(&SyntheticConfig {
        n_hours: 24 * 40,
        seed: 9,
        ..SyntheticConfig::default()
    })?;
    let schema = FeatureSchema::all_fields();
    let data = prepare(&masked, &schema, &MiceConfig::default())?;
    let cfg = ModelConfig {
        input_dim: schema.input_dim(),
        hidden_dim: 16,
        attention_dim: 8,
        task: Task::Classification,
        ..ModelConfig::default()
    };
    let (params, _) = train(
        cfg,
        data.train(),
        data.val(),
        &TrainConfig {
            max_epochs: 10,
            seed: 9,
            ..TrainConfig::default()
        },
    )?;
    let model = Forecaster {
        predictor: Predictor::Network(params),
        schema,
        normalizer: data.normalizer.clone(),
        imputer: data.imputer.clone(),
    };
    let report = evaluate_classification(&model, data.test())?;
    for e in report.entries.iter().filter(|e| e.horizon_hours == 4) {
        let c = e.classification.as_ref().unwrap();
        println!(
            "{:>5} +4h accuracy {:.3} macro-f1 {:.3} confusion {:?}",
            e.pollutant.column_name(),
            c.accuracy,
            c.macro_f1,
            c.confusion
        );
    }
    Ok(())
}
