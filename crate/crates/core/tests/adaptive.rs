use aeroadapt::checkpoint::{complete_with, Forecaster, Predictor};
use aeroadapt::features::{CompletedDataset, FeatureSchema};
use aeroadapt::impute::MiceConfig;
use aeroadapt::ingest::{generate_synthetic, SyntheticConfig};
use aeroadapt::nn::{ModelConfig, ModelParams, Task};
use aeroadapt::pipeline::{adaptive_run, prepare, AdaptiveConfig, TrainConfig};
use aeroadapt::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const INITIAL: usize = 24 * 7;

fn setup(periods: usize, task: Task) -> (Forecaster, CompletedDataset) {
    let (masked, _) = generate_synthetic(&SyntheticConfig {
        n_hours: INITIAL + 168 * periods,
        missing_rate: 0.05,
        drift_start_hour: Some(INITIAL),
        drift_slope: 0.01,
        seed: 13,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let schema = FeatureSchema::all_fields();
    let prepared = prepare(&masked.slice(0, INITIAL), &schema, &MiceConfig::default()).unwrap();
    let cfg = ModelConfig {
        input_dim: schema.input_dim(),
        hidden_dim: 6,
        attention_dim: 4,
        task,
        ..ModelConfig::default()
    };
    let model = Forecaster {
        predictor: Predictor::Network(ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(13)).unwrap()),
        schema: schema.clone(),
        normalizer: prepared.normalizer.clone(),
        imputer: prepared.imputer.clone(),
    };
    let completed = complete_with(&masked, model.imputer.as_ref(), &schema.input_fields()).unwrap();
    (model, completed)
}

fn quick() -> AdaptiveConfig {
    AdaptiveConfig {
        train: TrainConfig {
            max_epochs: 2,
            patience: None,
            seed: 3,
            ..TrainConfig::default()
        },
        ..AdaptiveConfig::default()
    }
}

#[test]
fn four_periods_give_four_checkpoints_and_losses() {
    let (model, data) = setup(4, Task::Regression);
    let dir = tempfile::tempdir().unwrap();
    let (state, report) = adaptive_run(&model, &data, INITIAL, &quick(), Some(dir.path())).unwrap();
    assert_eq!(report.periods.len(), 4);
    assert_eq!(state.history.len(), 4);
    assert_eq!(state.cursor, INITIAL + 4 * 168);
    for (k, p) in report.periods.iter().enumerate() {
        assert!(p.loss_before.is_finite());
        let path = dir.path().join(format!("period_{k:03}.ckpt"));
        assert_eq!(p.checkpoint.as_deref(), Some(path.as_path()));
        Forecaster::load(&path).unwrap();
    }
    // The first period is scored before any update.
    assert_eq!(report.periods[0].adaptive_rmse, report.periods[0].frozen_rmse);
}

#[test]
fn withholding_updates_reproduces_the_frozen_model() {
    let (model, data) = setup(3, Task::Regression);
    let cfg = AdaptiveConfig {
        withhold: true,
        ..quick()
    };
    let (state, report) = adaptive_run(&model, &data, INITIAL, &cfg, None).unwrap();
    for p in &report.periods {
        assert_eq!(p.adaptive_sse, p.frozen_sse);
        assert!(!p.retrained);
    }
    assert_eq!(report.final_gain, 0.0);
    assert_eq!(state.model, model);
}

#[test]
fn guard_never_accepts_a_worse_pool_loss() {
    let (model, data) = setup(3, Task::Regression);
    let (_, report) = adaptive_run(&model, &data, INITIAL, &quick(), None).unwrap();
    for p in &report.periods {
        let (before, after) = (p.pool_loss_before.unwrap(), p.pool_loss_after.unwrap());
        assert_eq!(p.accepted, after <= before);
    }
}

#[test]
fn short_stream_and_wrong_model_are_rejected() {
    let (model, data) = setup(1, Task::Regression);
    let short = data.slice(0, INITIAL + 100);
    assert!(matches!(
        adaptive_run(&model, &short, INITIAL, &quick(), None),
        Err(Error::TooShort { .. })
    ));
    let (classifier, data) = setup(1, Task::Classification);
    assert!(adaptive_run(&classifier, &data, INITIAL, &quick(), None).is_err());
}
