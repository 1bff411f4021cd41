//! Forest baseline on flattened windows, with feature importance.

use aeroadapt::baselines::{fit_random_forest, ForestConfig, TreeTask};
use aeroadapt::checkpoint::{Forecaster, Predictor};
use aeroadapt::features::FeatureSchema;
use aeroadapt::impute::MiceConfig;
use aeroadapt::ingest::{generate_synthetic, SyntheticConfig};
use aeroadapt::pipeline::{evaluate_regression, prepare};

fn main() -> aeroadapt::Result<()> {
    let (masked, _) = generate_synthetic(&SyntheticConfig {
        n_hours: 24 * 40,
        seed: 4,
        ..SyntheticConfig::default()
    })?;
    let schema = FeatureSchema::all_fields();
    let data = prepare(&masked, &schema, &MiceConfig::default())?;
    let x: Vec<Vec<f64>> = data.train().iter().map(|s| s.inputs.data().to_vec()).collect();
    let y: Vec<Vec<f64>> = data.train().iter().map(|s| s.targets_regression.data().to_vec()).collect();
    let forest = fit_random_forest(
        &x,
        TreeTask::MultiRegression(&y),
        &ForestConfig {
            n_trees: 30,
            max_depth: Some(8),
            seed: 4,
            ..ForestConfig::default()
        },
    )?;

    // Importance is per flattened input; sum it per feature over the window.
    let importance = forest.feature_importance();
    let dim = schema.input_dim();
    let mut per_feature = vec![0.0; dim];
    for (i, v) in importance.iter().enumerate() {
        per_feature[i % dim] += v;
    }
    let mut ranked: Vec<(&String, f64)> = schema.features.iter().zip(per_feature).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (name, v) in ranked.iter().take(5) {
        println!("{name:>15} {v:.3}");
    }

    let model = Forecaster {
        predictor: Predictor::Forest(forest),
        schema,
        normalizer: data.normalizer.clone(),
        imputer: data.imputer.clone(),
    };
    let report = evaluate_regression(&model, data.test())?;
    for e in report.entries.iter().filter(|e| e.horizon_hours == 4) {
        println!("{:>5} +4h rmse {:.3}", e.pollutant.column_name(), e.regression.as_ref().unwrap().rmse);
    }
    Ok(())
}
