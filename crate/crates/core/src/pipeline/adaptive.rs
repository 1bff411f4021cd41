//! Periodic retraining over a stream of hourly data, compared against the
//! frozen initial model.
//!
//! Each period: forecast with the current model `w_t` and record its loss,
//! add the period's samples to the training pool, retrain from `w_t` and
//! emit `w_{t+1}`. A sample belongs to the period in which its last target
//! hour falls.

use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::metrics::regression_predictions;
use super::train::{mean_loss, train, train_from, TrainConfig};
use super::fit_span_normalizer;
use crate::checkpoint::{Forecaster, Predictor};
use crate::domain::NormalizationSpec;
use crate::error::{Error, Result};
use crate::features::{build_windows, CompletedDataset, WindowSample};
use crate::nn::{ModelParams, Task};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    pub period_hours: usize,
    pub train: TrainConfig,
    /// Keep `w_t` when retraining raises the training-pool loss.
    pub guard: bool,
    /// Retrain from `w_t`; otherwise from a fresh initialisation.
    pub warm_start: bool,
    /// Ablation: never add period data to the pool, so no retraining happens.
    pub withhold: bool,
    /// Refit the normaliser on the pool before each retraining.
    pub refit_normalizer: bool,
    /// Periods pooled for the final comparison.
    pub final_periods: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            period_hours: 168,
            train: TrainConfig {
                max_epochs: 20,
                patience: Some(3),
                ..TrainConfig::default()
            },
            guard: true,
            warm_start: true,
            withhold: false,
            refit_normalizer: true,
            final_periods: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: usize,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub samples: usize,
    /// Loss of `w_t` on this period before updating.
    pub loss_before: f64,
    /// µg/m³ pooled over every pollutant and horizon.
    pub adaptive_rmse: f64,
    pub frozen_rmse: f64,
    pub adaptive_sse: f64,
    pub frozen_sse: f64,
    /// Scalar predictions behind the SSE values.
    pub values: usize,
    pub retrained: bool,
    pub accepted: bool,
    pub pool_loss_before: Option<f64>,
    pub pool_loss_after: Option<f64>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct OnlineState {
    pub model: Forecaster,
    pub history: Vec<PeriodRecord>,
    /// First hour not yet consumed.
    pub cursor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparativeReport {
    pub periods: Vec<PeriodRecord>,
    pub adaptive_rmse: f64,
    pub frozen_rmse: f64,
    pub final_periods: usize,
    pub adaptive_final_rmse: f64,
    pub frozen_final_rmse: f64,
    /// `1 - adaptive / frozen` over the final periods.
    pub final_gain: f64,
}

impl ComparativeReport {
    fn from_periods(periods: Vec<PeriodRecord>, final_periods: usize) -> Self {
        let pooled = |recs: &[PeriodRecord], adaptive: bool| {
            let sse: f64 = recs
                .iter()
                .map(|r| if adaptive { r.adaptive_sse } else { r.frozen_sse })
                .sum();
            let n: usize = recs.iter().map(|r| r.values).sum();
            if n == 0 {
                0.0
            } else {
                (sse / n as f64).sqrt()
            }
        };
        let k = final_periods.min(periods.len());
        let tail = &periods[periods.len() - k..];
        let adaptive_final_rmse = pooled(tail, true);
        let frozen_final_rmse = pooled(tail, false);
        ComparativeReport {
            adaptive_rmse: pooled(&periods, true),
            frozen_rmse: pooled(&periods, false),
            final_periods: k,
            adaptive_final_rmse,
            frozen_final_rmse,
            final_gain: if frozen_final_rmse > 0.0 {
                1.0 - adaptive_final_rmse / frozen_final_rmse
            } else {
                0.0
            },
            periods,
        }
    }

    /// One row per period.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Data(e.to_string());
        w.write_record([
            "period",
            "start",
            "end",
            "samples",
            "loss_before",
            "adaptive_rmse",
            "frozen_rmse",
            "retrained",
            "accepted",
        ])
        .map_err(err)?;
        for r in &self.periods {
            w.write_record([
                r.period.to_string(),
                crate::domain::format_timestamp(&r.start),
                crate::domain::format_timestamp(&r.end),
                r.samples.to_string(),
                r.loss_before.to_string(),
                r.adaptive_rmse.to_string(),
                r.frozen_rmse.to_string(),
                r.retrained.to_string(),
                r.accepted.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn network(model: &Forecaster) -> Result<&ModelParams> {
    match &model.predictor {
        Predictor::Network(p) if p.config.task == Task::Regression => Ok(p),
        _ => Err(Error::SchemaMismatch("adaptive runs need a regression network".into())),
    }
}

/// Squared error and count over all outputs, in µg/m³.
fn sse(model: &Forecaster, samples: &[WindowSample]) -> Result<(f64, usize)> {
    if samples.is_empty() {
        return Ok((0.0, 0));
    }
    let (pred, truth) = regression_predictions(model, samples)?;
    let mut total = 0.0;
    let mut n = 0;
    for (p, t) in pred.iter().zip(&truth) {
        for (a, b) in p.iter().zip(t) {
            total += (a - b) * (a - b);
            n += 1;
        }
    }
    Ok((total, n))
}

/// Samples whose last target hour lies in `[start, end)`.
fn in_hours(samples: &[WindowSample], first_target_end: usize, start: usize, end: usize) -> &[WindowSample] {
    // Sample i ends at hour first_target_end + i.
    let lo = start.saturating_sub(first_target_end).min(samples.len());
    let hi = end.saturating_sub(first_target_end).min(samples.len());
    &samples[lo..hi]
}

/// Runs the adaptive loop over `data[initial_hours..]` period by period.
/// `initial` should have been trained on hours before `initial_hours`.
pub fn adaptive_run(
    initial: &Forecaster,
    data: &CompletedDataset,
    initial_hours: usize,
    cfg: &AdaptiveConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<(OnlineState, ComparativeReport)> {
    network(initial)?;
    cfg.train.validate()?;
    if cfg.period_hours == 0 {
        return Err(Error::InvalidConfig("period_hours must be >= 1".into()));
    }
    let schema = &initial.schema;
    let available = data.len().saturating_sub(initial_hours);
    let n_periods = available / cfg.period_hours;
    if n_periods == 0 {
        return Err(Error::TooShort {
            required: initial_hours + cfg.period_hours,
            actual: data.len(),
        });
    }
    if let Some(dir) = checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let first_target_end = schema.window - 1 + schema.max_horizon();
    let frozen_samples = build_windows(data, schema, &initial.normalizer)?;
    let mut current = initial.clone();
    let mut current_samples = frozen_samples.clone();
    let mut records = Vec::with_capacity(n_periods);

    for k in 0..n_periods {
        let start = initial_hours + k * cfg.period_hours;
        let end = start + cfg.period_hours;
        let period_now = in_hours(&current_samples, first_target_end, start, end);
        let period_frozen = in_hours(&frozen_samples, first_target_end, start, end);
        let loss_before = mean_loss(network(&current)?, period_now)?;
        let (adaptive_sse, values) = sse(&current, period_now)?;
        let (frozen_sse, _) = sse(initial, period_frozen)?;
        let rmse = |s: f64| if values == 0 { 0.0 } else { (s / values as f64).sqrt() };

        let mut record = PeriodRecord {
            period: k,
            start: data.timestamps[start],
            end: data.timestamps[end - 1],
            samples: period_now.len(),
            loss_before,
            adaptive_rmse: rmse(adaptive_sse),
            frozen_rmse: rmse(frozen_sse),
            adaptive_sse,
            frozen_sse,
            values,
            retrained: false,
            accepted: false,
            pool_loss_before: None,
            pool_loss_after: None,
            checkpoint: None,
        };

        if !cfg.withhold {
            let normalizer: NormalizationSpec = if cfg.refit_normalizer {
                fit_span_normalizer(data, 0..end)?
            } else {
                current.normalizer.clone()
            };
            if normalizer != current.normalizer {
                current_samples = build_windows(data, schema, &normalizer)?;
            }
            let pool = in_hours(&current_samples, first_target_end, 0, end);
            let n_val = (pool.len() / 5).max(1).min(pool.len().saturating_sub(1));
            let (pool_train, pool_val) = pool.split_at(pool.len() - n_val);
            let train_cfg = TrainConfig {
                seed: cfg.train.seed.wrapping_add(k as u64 + 1),
                ..cfg.train
            };
            let w_t = network(&current)?.clone();
            let (candidate, _) = if cfg.warm_start {
                train_from(w_t.clone(), pool_train, pool_val, &train_cfg)?
            } else {
                train(w_t.config.clone(), pool_train, pool_val, &train_cfg)?
            };
            let before = mean_loss(&w_t, pool)?;
            let after = mean_loss(&candidate, pool)?;
            let accepted = !cfg.guard || after <= before;
            record.retrained = true;
            record.accepted = accepted;
            record.pool_loss_before = Some(before);
            record.pool_loss_after = Some(after);
            current = Forecaster {
                predictor: Predictor::Network(if accepted { candidate } else { w_t }),
                normalizer,
                ..current
            };
        }
        if let Some(dir) = checkpoint_dir {
            let path = dir.join(format!("period_{k:03}.ckpt"));
            current.save(&path)?;
            record.checkpoint = Some(path);
        }
        log::info!(
            "period {k}: adaptive rmse {:.3}, frozen rmse {:.3}",
            record.adaptive_rmse,
            record.frozen_rmse
        );
        records.push(record);
    }

    let report = ComparativeReport::from_periods(records.clone(), cfg.final_periods);
    Ok((
        OnlineState {
            model: current,
            history: records,
            cursor: initial_hours + n_periods * cfg.period_hours,
        },
        report,
    ))
}
