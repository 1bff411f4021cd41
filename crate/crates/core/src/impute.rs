//! Multivariate imputation by chained equations with deterministic per-column
//! linear regressors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RIDGE_LAMBDA: f64 = 1e-6;
const PIVOT_TOLERANCE: f64 = 1e-10;
const CLIP_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRegressor {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearRegressor {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }
}

/// In-place Cholesky factorisation of a dense symmetric matrix. Returns
/// `false` when a pivot is non-positive or negligible relative to the
/// diagonal scale, i.e. the system is numerically rank deficient.
fn cholesky(a: &mut [Vec<f64>]) -> bool {
    let n = a.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > PIVOT_TOLERANCE * scale) {
            return false;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i][i];
    }
    x
}

/// Least squares with an intercept. Falls back to ridge damping when the
/// normal equations are rank deficient.
pub fn fit_linear_regressor(x: &[Vec<f64>], y: &[f64]) -> Result<LinearRegressor> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Data("cannot fit a regressor on zero rows".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Data(format!("{} predictor rows for {} targets", x.len(), y.len())));
    }
    let p = x[0].len();
    let dim = p + 1;
    let mut gram = vec![vec![0.0; dim]; dim];
    let mut rhs = vec![0.0; dim];
    let mut augmented = vec![0.0; dim];
    for (row, &target) in x.iter().zip(y) {
        augmented[0] = 1.0;
        augmented[1..].copy_from_slice(row);
        for i in 0..dim {
            rhs[i] += augmented[i] * target;
            for j in 0..=i {
                gram[i][j] += augmented[i] * augmented[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            gram[j][i] = gram[i][j];
        }
    }
    let mut factor = gram.clone();
    if !cholesky(&mut factor) {
        factor = gram;
        for (i, row) in factor.iter_mut().enumerate() {
            row[i] += RIDGE_LAMBDA;
        }
        if !cholesky(&mut factor) {
            return Err(Error::Data("normal equations are singular even with damping".into()));
        }
    }
    let solution = cholesky_solve(&factor, &rhs);
    Ok(LinearRegressor {
        intercept: solution[0],
        coefficients: solution[1..].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiceConfig {
    pub n_iterations: usize,
    /// Stop once the largest change of any imputed cell falls below this.
    pub convergence_tol: f64,
    /// The linear variant is deterministic; kept so configurations round-trip.
    pub seed: u64,
}

impl Default for MiceConfig {
    fn default() -> Self {
        MiceConfig {
            n_iterations: 10,
            convergence_tol: 1e-4,
            seed: 0,
        }
    }
}

impl MiceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::InvalidConfig("n_iterations must be >= 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidConfig("convergence_tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationReport {
    pub imputed: Vec<(String, usize)>,
    pub iterations: usize,
    pub final_max_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnModel {
    pub name: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// Regressor on all other columns, in schema order.
    pub regressor: Option<LinearRegressor>,
}

impl ColumnModel {
    fn clip(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }
}

/// Fitted chained-equation state, reusable on later rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationModel {
    pub columns: Vec<ColumnModel>,
    pub config: MiceConfig,
}

fn predictors(filled: &[Vec<f64>], target: usize, row: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        filled
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != target)
            .map(|(_, col)| col[row]),
    );
}

/// Imputes every missing cell. Columns are visited in the given order,
/// which callers keep equal to the CSV schema order.
pub fn mice_impute(
    columns: &[(String, Vec<Option<f64>>)],
    config: &MiceConfig,
) -> Result<(Vec<Vec<f64>>, ImputationReport, ImputationModel)> {
    config.validate()?;
    let n_rows = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
    if columns.iter().any(|(_, c)| c.len() != n_rows) {
        return Err(Error::Data("imputation columns differ in length".into()));
    }

    let mut models = Vec::with_capacity(columns.len());
    for (name, values) in columns {
        let observed: Vec<f64> = values.iter().flatten().copied().collect();
        if observed.is_empty() {
            return Err(Error::FullyMissingColumn(name.clone()));
        }
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        let min = observed.iter().copied().fold(f64::INFINITY, f64::min);
        let max = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let margin = CLIP_MARGIN * (max - min);
        models.push(ColumnModel {
            name: name.clone(),
            mean,
            lower: min - margin,
            upper: max + margin,
            regressor: None,
        });
    }

    let masks: Vec<Vec<bool>> = columns
        .iter()
        .map(|(_, c)| c.iter().map(Option::is_none).collect())
        .collect();
    let mut filled: Vec<Vec<f64>> = columns
        .iter()
        .zip(&models)
        .map(|((_, c), m)| c.iter().map(|v| v.unwrap_or(m.mean)).collect())
        .collect();

    let imputed: Vec<(String, usize)> = models
        .iter()
        .zip(&masks)
        .map(|(m, mask)| (m.name.clone(), mask.iter().filter(|&&b| b).count()))
        .collect();
    let any_missing = imputed.iter().any(|(_, n)| *n > 0);

    let mut iterations = 0;
    let mut final_max_change = 0.0;
    if any_missing && columns.len() > 1 {
        let mut row_buf = Vec::with_capacity(columns.len());
        for _ in 0..config.n_iterations {
            iterations += 1;
            let mut max_change: f64 = 0.0;
            for target in 0..columns.len() {
                if !masks[target].iter().any(|&m| m) {
                    continue;
                }
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for row in 0..n_rows {
                    if !masks[target][row] {
                        predictors(&filled, target, row, &mut row_buf);
                        xs.push(row_buf.clone());
                        ys.push(filled[target][row]);
                    }
                }
                let regressor = fit_linear_regressor(&xs, &ys)?;
                for row in 0..n_rows {
                    if masks[target][row] {
                        predictors(&filled, target, row, &mut row_buf);
                        let v = models[target].clip(regressor.predict(&row_buf));
                        max_change = max_change.max((v - filled[target][row]).abs());
                        filled[target][row] = v;
                    }
                }
                models[target].regressor = Some(regressor);
            }
            final_max_change = max_change;
            if max_change < config.convergence_tol {
                break;
            }
        }
    }

    let report = ImputationReport {
        imputed,
        iterations,
        final_max_change,
    };
    let model = ImputationModel {
        columns: models,
        config: config.clone(),
    };
    Ok((filled, report, model))
}

impl ImputationModel {
    /// Fills `columns` with the frozen regressors; observed cells pass through.
    pub fn apply(&self, columns: &[Vec<Option<f64>>]) -> Result<Vec<Vec<f64>>> {
        if columns.len() != self.columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "imputer expects {} columns, got {}",
                self.columns.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map(Vec::len).unwrap_or(0);
        let mut filled: Vec<Vec<f64>> = columns
            .iter()
            .zip(&self.columns)
            .map(|(c, m)| c.iter().map(|v| v.unwrap_or(m.mean)).collect())
            .collect();
        let mut row_buf = Vec::with_capacity(columns.len());
        for _ in 0..self.config.n_iterations {
            let mut max_change: f64 = 0.0;
            for (target, model) in self.columns.iter().enumerate() {
                let Some(regressor) = &model.regressor else {
                    continue;
                };
                for row in 0..n_rows {
                    if columns[target][row].is_none() {
                        predictors(&filled, target, row, &mut row_buf);
                        let v = model.clip(regressor.predict(&row_buf));
                        max_change = max_change.max((v - filled[target][row]).abs());
                        filled[target][row] = v;
                    }
                }
            }
            if max_change < self.config.convergence_tol {
                break;
            }
        }
        Ok(filled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_line() {
        let r = fit_linear_regressor(&[vec![1.0], vec![2.0], vec![3.0]], &[2.0, 4.0, 6.0]).unwrap();
        assert!((r.coefficients[0] - 2.0).abs() < 1e-9);
        assert!(r.intercept.abs() < 1e-9);
    }

    #[test]
    fn constant_target() {
        let x = vec![vec![1.0, 5.0], vec![2.0, 3.0], vec![3.0, 8.0], vec![4.0, 1.0]];
        let r = fit_linear_regressor(&x, &[7.0; 4]).unwrap();
        assert!((r.intercept - 7.0).abs() < 1e-9);
        assert!(r.coefficients.iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn duplicated_column_is_damped() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 * i as f64 + 1.0).collect();
        let r = fit_linear_regressor(&x, &y).unwrap();
        assert!(r.coefficients.iter().all(|c| c.is_finite()));
        assert!((r.coefficients[0] + r.coefficients[1] - 3.0).abs() < 1e-4);
        assert!((r.predict(&[4.0, 4.0]) - 13.0).abs() < 1e-4);
    }

    #[test]
    fn zero_rows_is_an_error() {
        assert!(fit_linear_regressor(&[], &[]).is_err());
    }

    fn col(name: &str, v: Vec<Option<f64>>) -> (String, Vec<Option<f64>>) {
        (name.to_string(), v)
    }

    #[test]
    fn complete_data_is_identity() {
        let cols = vec![
            col("a", vec![Some(0.1), Some(0.2), Some(0.3)]),
            col("b", vec![Some(0.5), Some(0.4), Some(0.9)]),
        ];
        let (filled, report, _) = mice_impute(&cols, &MiceConfig::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(filled[0], vec![0.1, 0.2, 0.3]);
        assert_eq!(filled[1], vec![0.5, 0.4, 0.9]);
    }

    #[test]
    fn exact_linear_relation_is_recovered() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 40.0).collect();
        let mut ys: Vec<Option<f64>> = xs.iter().map(|x| Some(2.0 * x)).collect();
        ys[7] = None;
        let cols = vec![col("x", xs.iter().map(|&x| Some(x)).collect()), col("y", ys)];
        let (filled, report, _) = mice_impute(&cols, &MiceConfig::default()).unwrap();
        assert!((filled[1][7] - 2.0 * xs[7]).abs() < 1e-6);
        assert_eq!(report.imputed, vec![("x".into(), 0), ("y".into(), 1)]);
    }

    #[test]
    fn observed_cells_untouched_and_clipped() {
        let cols = vec![
            col("x", vec![Some(0.0), Some(0.5), Some(1.0), Some(10.0), None]),
            col("y", vec![Some(0.0), Some(0.5), Some(1.0), None, Some(0.2)]),
        ];
        let (filled, _, _) = mice_impute(&cols, &MiceConfig::default()).unwrap();
        assert_eq!(filled[0][..4], [0.0, 0.5, 1.0, 10.0]);
        assert_eq!(filled[1][..3], [0.0, 0.5, 1.0]);
        // y observed range [0, 1]: imputation at x = 10 is clipped to 1.1.
        assert!(filled[1][3] <= 1.1 + 1e-12 && filled[1][3] >= -0.1);
    }

    #[test]
    fn fully_missing_column_named() {
        let cols = vec![col("x", vec![Some(1.0), Some(2.0)]), col("humidity", vec![None, None])];
        match mice_impute(&cols, &MiceConfig::default()) {
            Err(Error::FullyMissingColumn(name)) => assert_eq!(name, "humidity"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_and_reusable() {
        let cols: Vec<_> = (0..3)
            .map(|c| {
                col(
                    &format!("c{c}"),
                    (0..50)
                        .map(|i| {
                            let v = ((i * (c + 2)) % 17) as f64 / 17.0;
                            ((i + c) % 5 != 0).then_some(v)
                        })
                        .collect(),
                )
            })
            .collect();
        let a = mice_impute(&cols, &MiceConfig::default()).unwrap();
        let b = mice_impute(&cols, &MiceConfig::default()).unwrap();
        assert_eq!(a, b);
        let raw: Vec<Vec<Option<f64>>> = cols.iter().map(|(_, c)| c.clone()).collect();
        let applied = a.2.apply(&raw).unwrap();
        for (c, column) in raw.iter().enumerate() {
            for (r, v) in column.iter().enumerate() {
                if let Some(v) = v {
                    assert_eq!(applied[c][r], *v);
                }
            }
        }
    }
}
