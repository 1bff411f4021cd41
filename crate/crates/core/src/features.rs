//! Feature ranking and selection, and conversion of a completed station
//! series into supervised window samples.

use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_random_forest, ForestConfig, MaxFeatures, TreeTask};
use crate::domain::{classify_level, encode_time, Field, MinMax, NormalizationSpec, Pollutant};
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const HOUR_FEATURE: &str = "hour";
pub const MONTH_FEATURE: &str = "month";
pub const DEFAULT_WINDOW: usize = 24;
pub const DEFAULT_HORIZONS: [usize; 6] = [4, 8, 12, 16, 20, 24];

/// Selected inputs plus the window geometry shared by training and serving.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    /// Input feature names in column order; time features come last.
    pub features: Vec<String>,
    pub window: usize,
    pub horizons: Vec<usize>,
    pub targets: Vec<Pollutant>,
}

impl FeatureSchema {
    pub fn new(features: Vec<String>) -> Result<Self> {
        let schema = FeatureSchema {
            features,
            window: DEFAULT_WINDOW,
            horizons: DEFAULT_HORIZONS.to_vec(),
            targets: Pollutant::FORECAST.to_vec(),
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Every field plus the time features.
    pub fn all_fields() -> Self {
        let mut names: Vec<String> = Field::ALL.iter().map(|f| f.name().to_string()).collect();
        names.push(HOUR_FEATURE.into());
        names.push(MONTH_FEATURE.into());
        FeatureSchema::new(names).expect("valid default schema")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for f in &self.features {
            if !seen.insert(f) {
                return Err(Error::SchemaMismatch(format!("duplicate feature `{f}`")));
            }
            if f != HOUR_FEATURE && f != MONTH_FEATURE && Field::from_name(f).is_none() {
                return Err(Error::SchemaMismatch(format!("unknown feature `{f}`")));
            }
        }
        if self.window == 0 {
            return Err(Error::SchemaMismatch("window must be >= 1".into()));
        }
        if self.horizons.is_empty() || self.horizons.windows(2).any(|w| w[0] >= w[1]) || self.horizons[0] == 0 {
            return Err(Error::SchemaMismatch("horizons must be positive and strictly increasing".into()));
        }
        if self.targets != Pollutant::FORECAST {
            return Err(Error::SchemaMismatch("targets must be PM2.5, PM10 and NO2".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.features.len()
    }

    pub fn max_horizon(&self) -> usize {
        *self.horizons.last().expect("validated horizons")
    }

    /// Hours of history plus lead time one sample consumes.
    pub fn min_hours(&self) -> usize {
        self.window + self.max_horizon()
    }

    /// Fields read by the inputs, excluding time features.
    pub fn input_fields(&self) -> Vec<Field> {
        self.features.iter().filter_map(|f| Field::from_name(f)).collect()
    }
}

/// A station series with every cell filled, in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedDataset {
    pub station_id: String,
    pub timestamps: Vec<NaiveDateTime>,
    pub columns: BTreeMap<Field, Vec<f64>>,
}

impl CompletedDataset {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn column(&self, field: Field) -> Result<&[f64]> {
        self.columns
            .get(&field)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::SchemaMismatch(format!("dataset has no `{field}` column")))
    }

    pub fn slice(&self, start: usize, end: usize) -> CompletedDataset {
        CompletedDataset {
            station_id: self.station_id.clone(),
            timestamps: self.timestamps[start..end].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|(f, v)| (*f, v[start..end].to_vec()))
                .collect(),
        }
    }
}

/// One supervised example: a `W × F` input window anchored at `anchor` and
/// targets at each horizon, laid out horizon-major, pollutant-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub inputs: Matrix,
    /// `H × 3` normalised concentrations (not clamped).
    pub targets_regression: Matrix,
    /// `H * 3` level classes.
    pub targets_class: Vec<u8>,
    pub anchor: NaiveDateTime,
}

/// Level class of a normalised concentration.
pub fn level_from_normalized(pollutant: Pollutant, range: &MinMax, u: f64) -> Result<u8> {
    Ok(classify_level(pollutant, range.denormalize(u).max(0.0))?.class_index)
}

fn feature_value(data: &CompletedDataset, name: &str, t: usize, norm: &NormalizationSpec) -> Result<f64> {
    match name {
        HOUR_FEATURE => Ok(encode_time(&data.timestamps[t]).scaled()[0]),
        MONTH_FEATURE => Ok(encode_time(&data.timestamps[t]).scaled()[1]),
        _ => {
            let field = Field::from_name(name)
                .ok_or_else(|| Error::SchemaMismatch(format!("unknown feature `{name}`")))?;
            norm.require(name)?.normalize(data.column(field)?[t])
        }
    }
}

/// Input window ending at hour index `end` (inclusive).
pub fn window_inputs(
    data: &CompletedDataset,
    schema: &FeatureSchema,
    norm: &NormalizationSpec,
    end: usize,
) -> Result<Matrix> {
    if end + 1 < schema.window || end >= data.len() {
        return Err(Error::TooShort {
            required: schema.window,
            actual: end.min(data.len()) + 1,
        });
    }
    let mut inputs = Matrix::zeros(schema.window, schema.input_dim());
    for (r, t) in (end + 1 - schema.window..=end).enumerate() {
        for (c, name) in schema.features.iter().enumerate() {
            inputs.set(r, c, feature_value(data, name, t, norm)?);
        }
    }
    Ok(inputs)
}

/// One sample per anchor `t` with inputs `[t-W+1, t]` and targets `t + h`.
pub fn build_windows(
    data: &CompletedDataset,
    schema: &FeatureSchema,
    norm: &NormalizationSpec,
) -> Result<Vec<WindowSample>> {
    schema.validate()?;
    let required = schema.min_hours();
    if data.len() < required {
        return Err(Error::TooShort {
            required,
            actual: data.len(),
        });
    }
    let target_cols: Vec<(&[f64], &MinMax, Pollutant)> = schema
        .targets
        .iter()
        .map(|&p| Ok((data.column(p.field())?, norm.require(p.column_name())?, p)))
        .collect::<Result<_>>()?;
    let h = schema.horizons.len();
    let mut samples = Vec::with_capacity(data.len() - required + 1);
    for anchor in schema.window - 1..data.len() - schema.max_horizon() {
        let inputs = window_inputs(data, schema, norm, anchor)?;
        let mut targets_regression = Matrix::zeros(h, target_cols.len());
        let mut targets_class = Vec::with_capacity(h * target_cols.len());
        for (hi, lead) in schema.horizons.iter().enumerate() {
            for (pi, (col, range, p)) in target_cols.iter().enumerate() {
                let u = range.scale(col[anchor + lead]);
                targets_regression.set(hi, pi, u);
                targets_class.push(level_from_normalized(*p, range, u)?);
            }
        }
        samples.push(WindowSample {
            inputs,
            targets_regression,
            targets_class,
            anchor: data.timestamps[anchor],
        });
    }
    Ok(samples)
}

/// Pearson correlation between columns. Constant columns correlate `0`
/// with every other column; their names are returned as notes.
pub fn correlation_matrix(columns: &[(String, Vec<f64>)]) -> Result<(Matrix, Vec<String>)> {
    let n = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
    if n < 2 {
        return Err(Error::TooFewSamples { required: 2, actual: n });
    }
    let f = columns.len();
    let mut centred = Vec::with_capacity(f);
    let mut norms = Vec::with_capacity(f);
    let mut notes = Vec::new();
    for (name, col) in columns {
        let mean = col.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let ss = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ss == 0.0 {
            notes.push(format!("`{name}` is constant; correlations set to 0"));
        }
        centred.push(c);
        norms.push(ss);
    }
    let mut m = Matrix::zeros(f, f);
    for i in 0..f {
        m.set(i, i, 1.0);
        for j in i + 1..f {
            let r = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                let dot: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
                (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
            m.set(i, j, r);
            m.set(j, i, r);
        }
    }
    Ok((m, notes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMethod {
    ForestImportance,
    BackwardElimination,
    ForwardConstruction,
}

impl std::str::FromStr for RankingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forest_importance" | "forest" => Ok(RankingMethod::ForestImportance),
            "backward_elimination" | "backward" => Ok(RankingMethod::BackwardElimination),
            "forward_construction" | "forward" => Ok(RankingMethod::ForwardConstruction),
            _ => Err(Error::InvalidConfig(format!("unknown ranking method `{s}`"))),
        }
    }
}

/// Candidate design for ranking: one row per hour of candidate features and
/// a scalar target (by default PM2.5 four hours ahead).
#[derive(Debug, Clone, PartialEq)]
pub struct RankingData {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl RankingData {
    pub fn from_dataset(
        data: &CompletedDataset,
        candidates: &[Field],
        norm: &NormalizationSpec,
        horizon: usize,
    ) -> Result<Self> {
        if data.len() <= horizon {
            return Err(Error::TooShort {
                required: horizon + 1,
                actual: data.len(),
            });
        }
        let target_col = data.column(Pollutant::Pm25.field())?;
        let target_range = norm.require(Pollutant::Pm25.column_name())?;
        let cols: Vec<(&[f64], &MinMax)> = candidates
            .iter()
            .map(|f| Ok((data.column(*f)?, norm.require(f.name())?)))
            .collect::<Result<_>>()?;
        let n = data.len() - horizon;
        let mut rows = Vec::with_capacity(n);
        let mut target = Vec::with_capacity(n);
        for t in 0..n {
            rows.push(cols.iter().map(|(c, r)| r.scale(c[t])).collect());
            target.push(target_range.scale(target_col[t + horizon]));
        }
        Ok(RankingData {
            names: candidates.iter().map(|f| f.name().to_string()).collect(),
            rows,
            target,
        })
    }

    fn project(&self, keep: &[usize]) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| keep.iter().map(|&i| r[i]).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    /// Forest: normalised importance. Wrappers: validation RMSE of the
    /// step at which the feature was removed (backward) or added (forward).
    pub score: f64,
}

fn wrapper_forest(seed: u64) -> ForestConfig {
    ForestConfig {
        n_trees: 20,
        max_depth: Some(6),
        min_samples_leaf: 5,
        max_features: MaxFeatures::All,
        bootstrap: true,
        seed,
    }
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Validation RMSE of a small forest restricted to `keep`.
fn subset_score(data: &RankingData, keep: &[usize], split: usize, seed: u64) -> Result<f64> {
    let (train_y, val_y) = data.target.split_at(split);
    if keep.is_empty() {
        let mean = train_y.iter().sum::<f64>() / train_y.len() as f64;
        return Ok(rmse(&vec![mean; val_y.len()], val_y));
    }
    let x = data.project(keep);
    let (train_x, val_x) = x.split_at(split);
    let forest = fit_random_forest(train_x, TreeTask::Regression(train_y), &wrapper_forest(seed))?;
    let preds: Vec<f64> = val_x.iter().map(|r| forest.predict_value(r)).collect();
    Ok(rmse(&preds, val_y))
}

/// Total order over candidate features, most useful first.
pub fn rank_features(data: &RankingData, method: RankingMethod, seed: u64) -> Result<Vec<RankedFeature>> {
    let f = data.names.len();
    if f < 2 {
        return Err(Error::Data(format!("need at least 2 candidate features, have {f}")));
    }
    if data.rows.len() < 10 {
        return Err(Error::TooFewSamples {
            required: 10,
            actual: data.rows.len(),
        });
    }
    // Visit features in name order so results do not depend on column order.
    let mut by_name: Vec<usize> = (0..f).collect();
    by_name.sort_by(|&a, &b| data.names[a].cmp(&data.names[b]));

    match method {
        RankingMethod::ForestImportance => {
            let x = data.project(&by_name);
            let config = ForestConfig {
                n_trees: 50,
                max_depth: Some(8),
                seed,
                ..ForestConfig::default()
            };
            let forest = fit_random_forest(&x, TreeTask::Regression(&data.target), &config)?;
            let importance = forest.feature_importance();
            let mut ranked: Vec<RankedFeature> = by_name
                .iter()
                .zip(importance)
                .map(|(&i, score)| RankedFeature {
                    name: data.names[i].clone(),
                    score,
                })
                .collect();
            ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
            Ok(ranked)
        }
        RankingMethod::BackwardElimination => {
            let split = data.rows.len() * 4 / 5;
            let mut remaining = by_name.clone();
            let mut removed: Vec<RankedFeature> = Vec::new();
            while remaining.len() > 1 {
                let mut best: Option<(f64, usize)> = None;
                for pos in 0..remaining.len() {
                    let mut keep = remaining.clone();
                    keep.remove(pos);
                    let score = subset_score(data, &keep, split, seed)?;
                    if best.is_none_or(|(s, _)| score < s) {
                        best = Some((score, pos));
                    }
                }
                let (score, pos) = best.expect("non-empty candidate set");
                let idx = remaining.remove(pos);
                removed.push(RankedFeature {
                    name: data.names[idx].clone(),
                    score,
                });
            }
            let last = remaining[0];
            removed.push(RankedFeature {
                name: data.names[last].clone(),
                score: subset_score(data, &[], split, seed)?,
            });
            removed.reverse();
            Ok(removed)
        }
        RankingMethod::ForwardConstruction => {
            let split = data.rows.len() * 4 / 5;
            let mut chosen: Vec<usize> = Vec::new();
            let mut ranked = Vec::new();
            let mut pool = by_name.clone();
            while !pool.is_empty() {
                let mut best: Option<(f64, usize)> = None;
                for pos in 0..pool.len() {
                    let mut keep = chosen.clone();
                    keep.push(pool[pos]);
                    let score = subset_score(data, &keep, split, seed)?;
                    if best.is_none_or(|(s, _)| score < s) {
                        best = Some((score, pos));
                    }
                }
                let (score, pos) = best.expect("non-empty pool");
                let idx = pool.remove(pos);
                chosen.push(idx);
                ranked.push(RankedFeature {
                    name: data.names[idx].clone(),
                    score,
                });
            }
            Ok(ranked)
        }
    }
}

/// Greedy selection in rank order, skipping any feature whose absolute
/// correlation with an already kept feature reaches `redundancy_threshold`.
/// A threshold of `1.0` or more disables the redundancy check.
pub fn select_features(
    ranked: &[RankedFeature],
    corr_names: &[String],
    corr: &Matrix,
    redundancy_threshold: f64,
    top_k: usize,
) -> Result<FeatureSchema> {
    let index_of = |name: &str| corr_names.iter().position(|n| n == name);
    let mut kept: Vec<&str> = Vec::new();
    for feature in ranked {
        if kept.len() >= top_k {
            break;
        }
        if redundancy_threshold < 1.0 {
            if let Some(i) = index_of(&feature.name) {
                let redundant = kept.iter().any(|k| {
                    index_of(k).is_some_and(|j| corr.get(i, j).abs() >= redundancy_threshold)
                });
                if redundant {
                    continue;
                }
            }
        }
        kept.push(&feature.name);
    }
    let mut names: Vec<String> = kept.into_iter().map(str::to_string).collect();
    names.push(HOUR_FEATURE.into());
    names.push(MONTH_FEATURE.into());
    FeatureSchema::new(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::parse_timestamp;
    use chrono::Duration;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(n: usize, seed: u64) -> (CompletedDataset, NormalizationSpec) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = parse_timestamp("2017-01-01T00:00").unwrap();
        let mut columns = BTreeMap::new();
        for field in Field::ALL {
            columns.insert(field, (0..n).map(|_| rng.random_range(0.0..200.0)).collect::<Vec<f64>>());
        }
        let data = CompletedDataset {
            station_id: "s".into(),
            timestamps: (0..n).map(|t| start + Duration::hours(t as i64)).collect(),
            columns,
        };
        let norm = crate::domain::fit_normalizer(
            Field::ALL.iter().map(|f| (f.name(), data.columns[f].clone())),
        )
        .unwrap();
        (data, norm)
    }

    #[test]
    fn window_counts() {
        let schema = FeatureSchema::all_fields();
        for (n, expected) in [(48, 1), (72, 25)] {
            let (data, norm) = synthetic(n, 1);
            assert_eq!(build_windows(&data, &schema, &norm).unwrap().len(), expected);
        }
        let (data, norm) = synthetic(47, 1);
        assert!(matches!(
            build_windows(&data, &schema, &norm),
            Err(Error::TooShort { required: 48, actual: 47 })
        ));
    }

    #[test]
    fn window_contents() {
        let (data, norm) = synthetic(60, 2);
        let schema = FeatureSchema::all_fields();
        let samples = build_windows(&data, &schema, &norm).unwrap();
        let s = &samples[3];
        let anchor = 3 + 23;
        assert_eq!(s.anchor, data.timestamps[anchor]);
        let pm25 = norm.get("pm25").unwrap();
        assert_eq!(s.inputs.get(23, 0), pm25.normalize(data.columns[&Field::ALL[0]][anchor]).unwrap());
        assert_eq!(s.inputs.get(0, 0), pm25.normalize(data.columns[&Field::ALL[0]][anchor - 23]).unwrap());
        assert_eq!(s.targets_regression.get(0, 0), pm25.scale(data.columns[&Field::ALL[0]][anchor + 4]));
        let no2 = norm.get("no2").unwrap();
        assert_eq!(s.targets_regression.get(5, 2), no2.scale(data.columns[&Field::ALL[2]][anchor + 24]));
        for sample in &samples {
            assert!(sample.inputs.data().iter().all(|v| (0.0..=1.0).contains(v)));
            for h in 0..6 {
                for (p, pol) in Pollutant::FORECAST.iter().enumerate() {
                    let range = norm.get(pol.column_name()).unwrap();
                    let conc = range.denormalize(sample.targets_regression.get(h, p)).max(0.0);
                    assert_eq!(
                        classify_level(*pol, conc).unwrap().class_index,
                        sample.targets_class[h * 3 + p]
                    );
                }
            }
        }
    }

    #[test]
    fn correlation_examples() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let c: Vec<f64> = vec![3.0; 50];
        let (m, notes) = correlation_matrix(&[("x".into(), x), ("y".into(), y), ("c".into(), c)]).unwrap();
        assert!((m.get(0, 1) - 1.0).abs() < 1e-9);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(2, 0), 0.0);
        assert_eq!(notes.len(), 1);
        assert!(correlation_matrix(&[("x".into(), vec![1.0])]).is_err());
    }

    #[test]
    fn independent_noise_is_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let (m, _) = correlation_matrix(&[("a".into(), a), ("b".into(), b)]).unwrap();
        assert!(m.get(0, 1).abs() < 0.05);
    }

    fn ranked(names: &[&str]) -> Vec<RankedFeature> {
        names
            .iter()
            .enumerate()
            .map(|(i, n)| RankedFeature {
                name: n.to_string(),
                score: 1.0 / (i + 1) as f64,
            })
            .collect()
    }

    #[test]
    fn selection_rules() {
        let names: Vec<String> = ["pm25", "pm10", "no2"].iter().map(|s| s.to_string()).collect();
        let corr = Matrix::from_rows(&[
            vec![1.0, 0.99, 0.1],
            vec![0.99, 1.0, 0.2],
            vec![0.1, 0.2, 1.0],
        ]);
        let r = ranked(&["pm25", "pm10", "no2"]);
        let s = select_features(&r, &names, &corr, 0.95, 3).unwrap();
        assert_eq!(s.features, vec!["pm25", "no2", "hour", "month"]);
        let s = select_features(&r, &names, &corr, 1.0, 2).unwrap();
        assert_eq!(s.features, vec!["pm25", "pm10", "hour", "month"]);
        let ident = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let s = select_features(&r, &names, &ident, 0.95, 3).unwrap();
        assert_eq!(s.features.len(), 5);
    }

    #[test]
    fn schema_validation() {
        assert!(FeatureSchema::new(vec!["pm25".into(), "pm25".into()]).is_err());
        assert!(FeatureSchema::new(vec!["rainfall".into()]).is_err());
        let mut s = FeatureSchema::all_fields();
        s.horizons = vec![8, 4];
        assert!(s.validate().is_err());
    }

    /// Target depends on feature `a` only; `noise` carries nothing.
    fn known_dependency(seed: u64, with_duplicate: bool) -> RankingData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 600;
        let mut names = vec!["a".to_string(), "b_noise".to_string(), "c_noise".to_string()];
        if with_duplicate {
            names.push("d_informative".into());
            names.push("a_copy".into());
        }
        let mut rows = Vec::new();
        let mut target = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random();
            let mut row = vec![a, rng.random(), rng.random()];
            let mut y = (3.0 * a).sin();
            if with_duplicate {
                let d: f64 = rng.random();
                y += 0.8 * d;
                row.push(d);
                row.push(a);
            }
            rows.push(row);
            target.push(y);
        }
        RankingData { names, rows, target }
    }

    #[test]
    fn every_method_finds_the_driver() {
        let data = known_dependency(4, false);
        for method in [
            RankingMethod::ForestImportance,
            RankingMethod::BackwardElimination,
            RankingMethod::ForwardConstruction,
        ] {
            let r = rank_features(&data, method, 7).unwrap();
            assert_eq!(r[0].name, "a", "{method:?}: {r:?}");
            assert_eq!(r.len(), 3);
        }
    }

    #[test]
    fn backward_drops_a_duplicate_before_informative() {
        let data = known_dependency(5, true);
        let r = rank_features(&data, RankingMethod::BackwardElimination, 3).unwrap();
        let pos = |n: &str| r.iter().position(|f| f.name == n).unwrap();
        let first_dup_dropped = pos("a").max(pos("a_copy"));
        assert!(first_dup_dropped > pos("d_informative"), "{r:?}");
    }

    #[test]
    fn forest_ranking_ignores_column_order() {
        let data = known_dependency(6, true);
        let perm = [3usize, 0, 4, 2, 1];
        let permuted = RankingData {
            names: perm.iter().map(|&i| data.names[i].clone()).collect(),
            rows: data.rows.iter().map(|r| perm.iter().map(|&i| r[i]).collect()).collect(),
            target: data.target.clone(),
        };
        let a = rank_features(&data, RankingMethod::ForestImportance, 1).unwrap();
        let b = rank_features(&permuted, RankingMethod::ForestImportance, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_candidates() {
        let data = RankingData {
            names: vec!["a".into()],
            rows: vec![vec![0.0]; 20],
            target: vec![0.0; 20],
        };
        assert!(rank_features(&data, RankingMethod::ForestImportance, 0).is_err());
    }
}
