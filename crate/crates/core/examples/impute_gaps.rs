//! Chained-equation imputation against a column-mean fill on masked cells.

use aeroadapt::domain::Field;
use aeroadapt::impute::{mice_impute, MiceConfig};
use aeroadapt::ingest::{generate_synthetic, SyntheticConfig};

fn main() -> aeroadapt::Result<()> {
    let cfg = SyntheticConfig {
        n_hours: 24 * 60,
        missing_rate: 0.2,
        seed: 5,
        ..SyntheticConfig::default()
    };
    let (masked, truth) = generate_synthetic(&cfg)?;
    let columns: Vec<(String, Vec<Option<f64>>)> = Field::ALL
        .iter()
        .map(|f| (f.name().to_string(), masked.column(*f)))
        .collect();
    let (filled, report, _model) = mice_impute(&columns, &MiceConfig::default())?;
    println!("converged after {} iterations", report.iterations);

    let (mut mice_se, mut mean_se, mut n) = (0.0, 0.0, 0usize);
    for (k, field) in Field::ALL.iter().enumerate() {
        let observed: Vec<f64> = columns[k].1.iter().flatten().copied().collect();
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        for (t, cell) in columns[k].1.iter().enumerate() {
            if cell.is_none() {
                let actual = truth.observations[t].get(*field).unwrap();
                mice_se += (filled[k][t] - actual).powi(2);
                mean_se += (mean - actual).powi(2);
                n += 1;
            }
        }
    }
    let mice = (mice_se / n as f64).sqrt();
    let mean = (mean_se / n as f64).sqrt();
    println!("{n} masked cells: mice rmse {mice:.3}, mean-fill rmse {mean:.3} (ratio {:.3})", mice / mean);
    Ok(())
}
