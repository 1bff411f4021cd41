//! Seasonal aggregation and SVG line charts.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{encode_time, Pollutant, Season};
use crate::error::{Error, Result};
use crate::ingest::StationDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonRow {
    pub season: Season,
    pub pollutant: Pollutant,
    /// Hours in the season.
    pub hours: usize,
    /// Hours with an observed value.
    pub observed: usize,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalSummary {
    /// Seasons without any hour are left out.
    pub rows: Vec<SeasonRow>,
}

impl SeasonalSummary {
    pub fn mean(&self, season: Season, pollutant: Pollutant) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.season == season && r.pollutant == pollutant)
            .and_then(|r| r.mean)
    }

    /// Seasons ordered by decreasing mean of `pollutant`.
    pub fn ranking(&self, pollutant: Pollutant) -> Vec<Season> {
        let mut rows: Vec<&SeasonRow> = self
            .rows
            .iter()
            .filter(|r| r.pollutant == pollutant && r.mean.is_some())
            .collect();
        rows.sort_by(|a, b| b.mean.unwrap().total_cmp(&a.mean.unwrap()));
        rows.into_iter().map(|r| r.season).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Data(e.to_string());
        w.write_record(["season", "pollutant", "hours", "observed", "mean"])
            .map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.season.name().to_string(),
                r.pollutant.column_name().to_string(),
                r.hours.to_string(),
                r.observed.to_string(),
                r.mean.map(|m| m.to_string()).unwrap_or_default(),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean concentration per season and pollutant; missing values are skipped.
pub fn seasonal_summary(data: &StationDataset) -> SeasonalSummary {
    let mut rows = Vec::new();
    for season in Season::ALL {
        let hours: Vec<_> = data
            .observations
            .iter()
            .filter(|o| encode_time(&o.timestamp).season == season)
            .collect();
        if hours.is_empty() {
            continue;
        }
        for pollutant in Pollutant::ALL {
            let values: Vec<f64> = hours.iter().filter_map(|o| o.pollutant(pollutant)).collect();
            rows.push(SeasonRow {
                season,
                pollutant,
                hours: hours.len(),
                observed: values.len(),
                mean: (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64),
            });
        }
    }
    SeasonalSummary { rows }
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line chart of equally spaced series. Output depends only on the inputs.
pub fn line_chart_svg(title: &str, series: &[(&str, &[f64])]) -> String {
    let (width, height, margin) = (800.0, 320.0, 48.0);
    let finite = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let longest = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0).max(2);
    let x = |i: usize| margin + (width - 2.0 * margin) * i as f64 / (longest - 1) as f64;
    let y = |v: f64| height - margin - (height - 2.0 * margin) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="#444"/><line x1="{m}" y1="{m}" x2="{m}" y2="{b}" stroke="#444"/>"##,
        m = margin,
        b = height - margin,
        r = width - margin
    );
    for (label, v) in [(lo, lo), (hi, hi)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{:.1}</text>"#,
            margin - 4.0,
            y(v) + 4.0,
            label
        );
    }
    for (k, (name, values)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let mut points = String::new();
        for (i, v) in values.iter().enumerate().filter(|(_, v)| v.is_finite()) {
            let _ = write!(points, "{:.2},{:.2} ", x(i), y(*v));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            points.trim_end()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{colour}">{}</text>"#,
            width - margin - 120.0,
            margin + 16.0 * k as f64,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, SyntheticConfig};

    #[test]
    fn winter_peaks_with_seasonal_amplitude() {
        let cfg = SyntheticConfig {
            n_hours: 365 * 24,
            noise_std: 0.0,
            ..SyntheticConfig::default()
        };
        let (data, _) = generate_synthetic(&cfg).unwrap();
        let s = seasonal_summary(&data);
        assert_eq!(s.ranking(Pollutant::Pm25)[0], Season::Winter);
    }

    #[test]
    fn constant_series_has_equal_means() {
        let cfg = SyntheticConfig {
            n_hours: 24 * 200,
            noise_std: 0.0,
            diurnal_amplitude: 0.0,
            seasonal_amplitude: 0.0,
            ..SyntheticConfig::default()
        };
        let (data, _) = generate_synthetic(&cfg).unwrap();
        let s = seasonal_summary(&data);
        let means: Vec<f64> = s
            .rows
            .iter()
            .filter(|r| r.pollutant == Pollutant::No2)
            .map(|r| r.mean.unwrap())
            .collect();
        assert!(means.len() >= 2);
        assert!(means.iter().all(|m| (m - means[0]).abs() < 1e-9));
        // 200 days from January never reach the autumn months.
        assert!(s.rows.iter().all(|r| r.season != Season::Autumn));
    }

    #[test]
    fn svg_is_deterministic() {
        let a = [1.0, 2.0, 3.0];
        let b = [1.5, 2.5, 2.0];
        let one = line_chart_svg("PM2.5 <4h>", &[("actual", &a), ("predicted", &b)]);
        let two = line_chart_svg("PM2.5 <4h>", &[("actual", &a), ("predicted", &b)]);
        assert_eq!(one, two);
        assert!(one.contains("&lt;4h&gt;"));
        assert_eq!(one.matches("<polyline").count(), 2);
    }
}
