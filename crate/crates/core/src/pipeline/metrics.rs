//! Regression and classification metrics, and evaluation reports.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Forecaster;
use crate::domain::Pollutant;
use crate::error::{Error, Result};
use crate::features::{level_from_normalized, WindowSample};
use crate::nn::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub n: usize,
    pub rmse: f64,
    /// `1 - SS_res / SS_tot`; `None` when the targets have zero variance.
    pub r2: Option<f64>,
    /// `Σ(ŷ - ȳ)² / Σ(y - ȳ)²`; `None` when the targets have zero variance.
    pub r2_ratio: Option<f64>,
    pub zero_variance: bool,
    pub y_avg: f64,
}

pub fn regression_metrics(predicted: &[f64], actual: &[f64]) -> Result<RegressionMetrics> {
    if predicted.len() != actual.len() {
        return Err(Error::Data("prediction and target lengths differ".into()));
    }
    let n = actual.len();
    if n == 0 {
        return Err(Error::TooFewSamples { required: 1, actual: 0 });
    }
    let y_avg = actual.iter().sum::<f64>() / n as f64;
    let ss_res: f64 = predicted.iter().zip(actual).map(|(p, y)| (p - y) * (p - y)).sum();
    let ss_tot: f64 = actual.iter().map(|y| (y - y_avg) * (y - y_avg)).sum();
    let ss_reg: f64 = predicted.iter().map(|p| (p - y_avg) * (p - y_avg)).sum();
    let zero_variance = ss_tot == 0.0;
    Ok(RegressionMetrics {
        n,
        rmse: (ss_res / n as f64).sqrt(),
        r2: (!zero_variance).then(|| 1.0 - ss_res / ss_tot),
        r2_ratio: (!zero_variance).then(|| ss_reg / ss_tot),
        zero_variance,
        y_avg,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u8,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    /// Harmonic mean of precision and recall.
    pub f1: f64,
    /// Set when `tp + fp == 0`; precision is reported as 0.
    pub precision_undefined: bool,
    /// Set when `tp + fn == 0`; recall is reported as 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub n: usize,
    /// `confusion[actual][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

pub fn classification_metrics(predicted: &[u8], actual: &[u8], n_classes: usize) -> Result<ClassificationMetrics> {
    if predicted.len() != actual.len() {
        return Err(Error::Data("prediction and target lengths differ".into()));
    }
    let n = actual.len();
    if n == 0 {
        return Err(Error::TooFewSamples { required: 1, actual: 0 });
    }
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &a) in predicted.iter().zip(actual) {
        if p as usize >= n_classes || a as usize >= n_classes {
            return Err(Error::Data(format!("class index outside 0..{n_classes}")));
        }
        confusion[a as usize][p as usize] += 1;
    }
    let trace: u64 = (0..n_classes).map(|c| confusion[c][c]).sum();
    let per_class: Vec<ClassMetrics> = (0..n_classes)
        .map(|c| {
            let tp = confusion[c][c];
            let fp = (0..n_classes).filter(|&a| a != c).map(|a| confusion[a][c]).sum::<u64>();
            let fn_ = (0..n_classes).filter(|&p| p != c).map(|p| confusion[c][p]).sum::<u64>();
            let precision_undefined = tp + fp == 0;
            let recall_undefined = tp + fn_ == 0;
            let precision = if precision_undefined { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let recall = if recall_undefined { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                class: c as u8,
                tp,
                fp,
                fn_,
                precision,
                recall,
                f1,
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();
    let k = n_classes as f64;
    Ok(ClassificationMetrics {
        n,
        accuracy: trace as f64 / n as f64,
        macro_precision: per_class.iter().map(|c| c.precision).sum::<f64>() / k,
        macro_recall: per_class.iter().map(|c| c.recall).sum::<f64>() / k,
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / k,
        per_class,
        confusion,
    })
}

/// Metrics for one pollutant at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub pollutant: Pollutant,
    pub horizon_hours: usize,
    pub regression: Option<RegressionMetrics>,
    pub classification: Option<ClassificationMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub n_samples: usize,
    pub entries: Vec<EvalEntry>,
}

impl EvalReport {
    pub fn entry(&self, pollutant: Pollutant, horizon_hours: usize) -> Option<&EvalEntry> {
        self.entries
            .iter()
            .find(|e| e.pollutant == pollutant && e.horizon_hours == horizon_hours)
    }

    /// One row per entry; classification columns hold macro averages.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Data(e.to_string());
        w.write_record([
            "pollutant",
            "horizon_hours",
            "n",
            "rmse",
            "r2",
            "r2_ratio",
            "accuracy",
            "macro_precision",
            "macro_recall",
            "macro_f1",
        ])
        .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.entries {
            let r = e.regression.as_ref();
            let c = e.classification.as_ref();
            w.write_record([
                e.pollutant.column_name().to_string(),
                e.horizon_hours.to_string(),
                r.map(|m| m.n).or(c.map(|m| m.n)).unwrap_or(0).to_string(),
                opt(r.map(|m| m.rmse)),
                opt(r.and_then(|m| m.r2)),
                opt(r.and_then(|m| m.r2_ratio)),
                opt(c.map(|m| m.accuracy)),
                opt(c.map(|m| m.macro_precision)),
                opt(c.map(|m| m.macro_recall)),
                opt(c.map(|m| m.macro_f1)),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Denormalised predictions and targets, `[sample][horizon * 3 + pollutant]`.
pub fn regression_predictions(model: &Forecaster, samples: &[WindowSample]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let targets = &model.schema.targets;
    let ranges: Vec<_> = targets
        .iter()
        .map(|p| model.normalizer.require(p.column_name()).copied())
        .collect::<Result<_>>()?;
    let p = targets.len();
    let preds: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|s| {
            Ok(model
                .predictor
                .predict_regression(&s.inputs)?
                .iter()
                .enumerate()
                .map(|(k, &u)| ranges[k % p].denormalize(u))
                .collect())
        })
        .collect::<Result<_>>()?;
    let truth = samples
        .iter()
        .map(|s| {
            s.targets_regression
                .data()
                .iter()
                .enumerate()
                .map(|(k, &u)| ranges[k % p].denormalize(u))
                .collect()
        })
        .collect();
    Ok((preds, truth))
}

/// RMSE and both R² variants in µg/m³ per pollutant per horizon.
pub fn evaluate_regression(model: &Forecaster, samples: &[WindowSample]) -> Result<EvalReport> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            actual: samples.len(),
        });
    }
    let (preds, truth) = regression_predictions(model, samples)?;
    let p = model.schema.targets.len();
    let mut entries = Vec::new();
    for (hi, &h) in model.schema.horizons.iter().enumerate() {
        for (pi, &pol) in model.schema.targets.iter().enumerate() {
            let k = hi * p + pi;
            let yhat: Vec<f64> = preds.iter().map(|r| r[k]).collect();
            let y: Vec<f64> = truth.iter().map(|r| r[k]).collect();
            entries.push(EvalEntry {
                pollutant: pol,
                horizon_hours: h,
                regression: Some(regression_metrics(&yhat, &y)?),
                classification: None,
            });
        }
    }
    Ok(EvalReport {
        model: model.predictor.kind_name().to_string(),
        n_samples: samples.len(),
        entries,
    })
}

fn class_report(model: &Forecaster, samples: &[WindowSample], predicted: &[Vec<u8>], label: String) -> Result<EvalReport> {
    let p = model.schema.targets.len();
    let mut entries = Vec::new();
    for (hi, &h) in model.schema.horizons.iter().enumerate() {
        for (pi, &pol) in model.schema.targets.iter().enumerate() {
            let k = hi * p + pi;
            let yhat: Vec<u8> = predicted.iter().map(|r| r[k]).collect();
            let y: Vec<u8> = samples.iter().map(|s| s.targets_class[k]).collect();
            let n_classes = pol.level_count().expect("forecast pollutants have levels");
            entries.push(EvalEntry {
                pollutant: pol,
                horizon_hours: h,
                regression: None,
                classification: Some(classification_metrics(&yhat, &y, n_classes)?),
            });
        }
    }
    Ok(EvalReport {
        model: label,
        n_samples: samples.len(),
        entries,
    })
}

/// Accuracy, precision, recall and F1 of a classifier checkpoint.
pub fn evaluate_classification(model: &Forecaster, samples: &[WindowSample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { required: 1, actual: 0 });
    }
    if model.predictor.task() != Task::Classification {
        return Err(Error::SchemaMismatch("evaluate_classification needs a classifier".into()));
    }
    let predicted: Vec<Vec<u8>> = samples
        .par_iter()
        .map(|s| model.predictor.predict_classes(&s.inputs))
        .collect::<Result<_>>()?;
    class_report(model, samples, &predicted, model.predictor.kind_name().to_string())
}

/// Classifies denormalised regressor output with the level thresholds and
/// scores it like a classifier.
pub fn classify_from_regressor(model: &Forecaster, samples: &[WindowSample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { required: 1, actual: 0 });
    }
    let p = model.schema.targets.len();
    let ranges: Vec<_> = model
        .schema
        .targets
        .iter()
        .map(|t| model.normalizer.require(t.column_name()).copied())
        .collect::<Result<_>>()?;
    let predicted: Vec<Vec<u8>> = samples
        .par_iter()
        .map(|s| {
            model
                .predictor
                .predict_regression(&s.inputs)?
                .iter()
                .enumerate()
                .map(|(k, &u)| level_from_normalized(model.schema.targets[k % p], &ranges[k % p], u))
                .collect()
        })
        .collect::<Result<_>>()?;
    class_report(model, samples, &predicted, format!("{}+thresholds", model.predictor.kind_name()))
}
