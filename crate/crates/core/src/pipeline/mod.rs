//! Orchestration: chronological splits, data preparation, training,
//! evaluation, the adaptive retraining loop and seasonal reporting.

pub mod adaptive;
pub mod metrics;
pub mod report;
pub mod train;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::checkpoint::complete_with;
use crate::domain::{fit_normalizer, Field, NormalizationSpec};
use crate::error::{Error, Result};
use crate::features::{build_windows, CompletedDataset, FeatureSchema, WindowSample};
use crate::impute::{mice_impute, ImputationModel, ImputationReport, MiceConfig};
use crate::ingest::StationDataset;

pub use adaptive::{adaptive_run, AdaptiveConfig, ComparativeReport, OnlineState, PeriodRecord};
pub use metrics::{
    classification_metrics, classify_from_regressor, evaluate_classification, evaluate_regression,
    regression_metrics, ClassMetrics, ClassificationMetrics, EvalEntry, EvalReport, RegressionMetrics,
};
pub use report::{line_chart_svg, seasonal_summary, SeasonRow, SeasonalSummary};
pub use train::{train, train_from, EpochRecord, TrainConfig, TrainingHistory};

/// Minimum number of samples a split needs.
pub const MIN_SAMPLES: usize = 10;

/// Chronological sample ranges: 64 % train, 16 % validation, rest test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

pub fn split_dataset(n_samples: usize) -> Result<SplitSpec> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_SAMPLES,
            actual: n_samples,
        });
    }
    let n_train = n_samples * 64 / 100;
    let n_val = n_samples * 16 / 100;
    Ok(SplitSpec {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..n_samples,
    })
}

/// Everything derived from one station dataset before training.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub completed: CompletedDataset,
    pub samples: Vec<WindowSample>,
    pub split: SplitSpec,
    pub schema: FeatureSchema,
    pub normalizer: NormalizationSpec,
    pub imputer: Option<ImputationModel>,
    pub imputation: Option<ImputationReport>,
    /// Hours `[0, fit_hours)` were used to fit the imputer and normaliser.
    pub fit_hours: usize,
}

impl PreparedData {
    pub fn train(&self) -> &[WindowSample] {
        &self.samples[self.split.train.clone()]
    }

    pub fn val(&self) -> &[WindowSample] {
        &self.samples[self.split.val.clone()]
    }

    pub fn test(&self) -> &[WindowSample] {
        &self.samples[self.split.test.clone()]
    }
}

/// Hours consumed by the first `n_samples` windows under `schema`.
pub fn hours_for_samples(schema: &FeatureSchema, n_samples: usize) -> usize {
    if n_samples == 0 {
        0
    } else {
        n_samples - 1 + schema.min_hours()
    }
}

fn fields_present(data: &StationDataset, hours: Range<usize>) -> Vec<Field> {
    Field::ALL
        .iter()
        .copied()
        .filter(|f| data.observations[hours.clone()].iter().any(|o| o.get(*f).is_some()))
        .collect()
}

/// Fits MICE on `[0, fit_hours)` over every field observed there and
/// completes the whole dataset: MICE output for the fitted span, the frozen
/// regressors beyond it.
pub fn impute_dataset(
    data: &StationDataset,
    fit_hours: usize,
    required: &[Field],
    mice: &MiceConfig,
) -> Result<(CompletedDataset, Option<ImputationModel>, Option<ImputationReport>)> {
    let fit_hours = fit_hours.min(data.len());
    let fields = fields_present(data, 0..fit_hours);
    for f in required {
        if !fields.contains(f) {
            return Err(Error::FullyMissingColumn(f.name().to_string()));
        }
    }
    let any_missing = fields
        .iter()
        .any(|f| data.observations.iter().any(|o| o.get(*f).is_none()));
    if !any_missing {
        return Ok((complete_with(data, None, required)?, None, None));
    }
    let fit_cols: Vec<(String, Vec<Option<f64>>)> = fields
        .iter()
        .map(|f| (f.name().to_string(), data.column(*f)[..fit_hours].to_vec()))
        .collect();
    let (filled, report, model) = mice_impute(&fit_cols, mice)?;
    let mut completed = complete_with(data, Some(&model), required)?;
    for (f, col) in fields.iter().zip(filled) {
        completed.columns.get_mut(f).expect("imputed column")[..fit_hours].copy_from_slice(&col);
    }
    Ok((completed, Some(model), Some(report)))
}

/// Normaliser over every completed field, fitted on `hours`.
pub fn fit_span_normalizer(data: &CompletedDataset, hours: Range<usize>) -> Result<NormalizationSpec> {
    fit_normalizer(
        data.columns
            .iter()
            .map(|(f, v)| (f.name(), v[hours.clone()].to_vec())),
    )
}

/// Imputes, normalises with training-span statistics, windows and splits.
pub fn prepare(data: &StationDataset, schema: &FeatureSchema, mice: &MiceConfig) -> Result<PreparedData> {
    schema.validate()?;
    if data.len() < schema.min_hours() {
        return Err(Error::TooShort {
            required: schema.min_hours(),
            actual: data.len(),
        });
    }
    let n_samples = data.len() - schema.min_hours() + 1;
    let split = split_dataset(n_samples)?;
    let fit_hours = hours_for_samples(schema, split.train.len()).max(1);
    let mut required = schema.input_fields();
    for p in &schema.targets {
        if !required.contains(&p.field()) {
            required.push(p.field());
        }
    }
    let (completed, imputer, imputation) = impute_dataset(data, fit_hours, &required, mice)?;
    let normalizer = fit_span_normalizer(&completed, 0..fit_hours)?;
    let samples = build_windows(&completed, schema, &normalizer)?;
    debug_assert_eq!(samples.len(), n_samples);
    Ok(PreparedData {
        completed,
        samples,
        split,
        schema: schema.clone(),
        normalizer,
        imputer,
        imputation,
        fit_hours,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, SyntheticConfig};

    #[test]
    fn split_examples() {
        let s = split_dataset(100).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (64, 16, 20));
        let s = split_dataset(10).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 1, 3));
        assert!(split_dataset(9).is_err());
        for n in 10..300 {
            let s = split_dataset(n).unwrap();
            assert_eq!(s.train.end, s.val.start);
            assert_eq!(s.val.end, s.test.start);
            assert_eq!(s.test.end, n);
            assert!(s.train.end < s.test.start);
        }
    }

    #[test]
    fn prepare_is_chronological_and_complete() {
        let cfg = SyntheticConfig {
            n_hours: 400,
            missing_rate: 0.1,
            seed: 3,
            ..SyntheticConfig::default()
        };
        let (masked, _) = generate_synthetic(&cfg).unwrap();
        let p = prepare(&masked, &FeatureSchema::all_fields(), &MiceConfig::default()).unwrap();
        assert_eq!(p.samples.len(), 400 - 48 + 1);
        let last_train = p.train().last().unwrap().anchor;
        assert!(last_train < p.val()[0].anchor);
        assert!(p.val().last().unwrap().anchor < p.test()[0].anchor);
        assert!(p.imputer.is_some());
        for col in p.completed.columns.values() {
            assert!(col.iter().all(|v| v.is_finite()));
        }
        for s in &p.samples {
            assert!(s.inputs.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
