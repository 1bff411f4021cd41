//! Seasonal means for a year of data and an SVG of one month of PM2.5.

use aeroadapt::domain::Pollutant;
use aeroadapt::ingest::{generate_synthetic, SyntheticConfig};
use aeroadapt::pipeline::{line_chart_svg, seasonal_summary};

fn main() -> aeroadapt::Result<()> {
    let (masked, _) = generate_synthetic(&SyntheticConfig {
        n_hours: 365 * 24,
        missing_rate: 0.1,
        seed: 1,
        ..SyntheticConfig::default()
    })?;
    let summary = seasonal_summary(&masked);
    let mut csv = Vec::new();
    summary.write_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    println!("pm25 seasons by mean: {:?}", summary.ranking(Pollutant::Pm25));

    let month: Vec<f64> = masked.observations[..24 * 30]
        .iter()
        .map(|o| o.pollutant(Pollutant::Pm25).unwrap_or(f64::NAN))
        .collect();
    let svg = line_chart_svg("PM2.5, January", &[("observed", &month)]);
    let path = std::env::temp_dir().join("aeroadapt_pm25_january.svg");
    std::fs::write(&path, svg)?;
    println!("chart -> {}", path.display());
    Ok(())
}
