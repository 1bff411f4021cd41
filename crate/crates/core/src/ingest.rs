//! Station CSV ingestion onto a contiguous hourly grid, plus a seeded
//! synthetic generator with known ground truth.

use std::f64::consts::PI;
use std::io::{Read, Write};

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{format_timestamp, parse_timestamp, Field, HourlyObservation, Pollutant};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 12] = [
    "timestamp",
    "pm25",
    "pm10",
    "no2",
    "so2",
    "co",
    "o3",
    "temperature",
    "humidity",
    "wind_speed",
    "wind_direction",
    "pressure",
];

/// A recoverable problem found while reading a file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub line: Option<u64>,
    pub message: String,
}

impl Issue {
    fn at(line: u64, message: impl Into<String>) -> Self {
        Issue {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Issue {
            line: None,
            message: message.into(),
        }
    }
}

/// Hourly observations of one station on a gap-free grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StationDataset {
    pub station_id: String,
    pub observations: Vec<HourlyObservation>,
}

impl StationDataset {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn start(&self) -> Option<NaiveDateTime> {
        self.observations.first().map(|o| o.timestamp)
    }

    pub fn end(&self) -> Option<NaiveDateTime> {
        self.observations.last().map(|o| o.timestamp)
    }

    /// Fraction of hours where `field` is present.
    pub fn coverage(&self, field: Field) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let present = self
            .observations
            .iter()
            .filter(|o| o.get(field).is_some())
            .count();
        present as f64 / self.len() as f64
    }

    pub fn missing_fraction(&self, field: Field) -> f64 {
        1.0 - self.coverage(field)
    }

    pub fn column(&self, field: Field) -> Vec<Option<f64>> {
        self.observations.iter().map(|o| o.get(field)).collect()
    }

    pub fn slice(&self, start: usize, end: usize) -> StationDataset {
        StationDataset {
            station_id: self.station_id.clone(),
            observations: self.observations[start..end].to_vec(),
        }
    }

    /// Appends later hours, filling any gap between the two blocks.
    pub fn extend(&mut self, more: &[HourlyObservation]) {
        let mut rows = std::mem::take(&mut self.observations);
        rows.extend_from_slice(more);
        *self = regularize_grid(&self.station_id, rows);
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_observations(writer, &self.observations)
    }
}

fn is_missing_token(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// Reads a station CSV. See [`CSV_HEADER`] for the column vocabulary; any
/// subset of the eleven fields may appear, in any order.
pub fn parse_observations<R: Read>(
    reader: R,
    station_id: &str,
) -> Result<(StationDataset, Vec<Issue>)> {
    let mut csv = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut issues = Vec::new();

    let headers = csv
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut timestamp_col = None;
    let mut columns: Vec<(usize, Field)> = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        let key = name.to_ascii_lowercase();
        if key == "timestamp" {
            timestamp_col = Some(i);
        } else if let Some(field) = Field::from_name(&key) {
            columns.push((i, field));
        } else {
            issues.push(Issue::at(1, format!("ignoring unknown column `{name}`")));
        }
    }
    let timestamp_col = timestamp_col.ok_or_else(|| Error::Parse {
        line: 1,
        message: "header has no `timestamp` column".into(),
    })?;
    for field in Field::ALL {
        if !columns.iter().any(|(_, f)| *f == field) {
            issues.push(Issue::general(format!("field `{field}` absent from file")));
        }
    }

    let mut rows: Vec<(u64, HourlyObservation)> = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let raw_ts = record.get(timestamp_col).unwrap_or("");
        let timestamp = parse_timestamp(raw_ts).ok_or_else(|| Error::Parse {
            line,
            message: format!("unparseable timestamp `{raw_ts}`"),
        })?;
        let mut obs = HourlyObservation::empty(timestamp);
        for &(col, field) in &columns {
            let cell = record.get(col).unwrap_or("");
            if is_missing_token(cell) {
                continue;
            }
            let value = match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    issues.push(Issue::at(line, format!("`{field}` value `{cell}` is not a number")));
                    continue;
                }
            };
            if field.is_pollutant() && value < 0.0 {
                issues.push(Issue::at(line, format!("negative `{field}` treated as missing")));
                continue;
            }
            if field == Field::Humidity && !(0.0..=100.0).contains(&value) {
                issues.push(Issue::at(line, format!("humidity {value} outside [0, 100]")));
                continue;
            }
            obs.set(field, Some(value));
        }
        rows.push((line, obs));
    }

    rows.sort_by_key(|(_, o)| o.timestamp);
    let mut deduped: Vec<HourlyObservation> = Vec::with_capacity(rows.len());
    for (line, obs) in rows {
        if let Some(last) = deduped.last_mut() {
            if last.timestamp == obs.timestamp {
                issues.push(Issue::at(
                    line,
                    format!("duplicate hour {}, keeping the later row", format_timestamp(&obs.timestamp)),
                ));
                *last = obs;
                continue;
            }
        }
        deduped.push(obs);
    }

    Ok((regularize_grid(station_id, deduped), issues))
}

/// Sorts rows and inserts all-missing hours for every gap between the first
/// and last timestamp.
pub fn regularize_grid(station_id: &str, mut rows: Vec<HourlyObservation>) -> StationDataset {
    rows.sort_by_key(|o| o.timestamp);
    rows.dedup_by(|later, earlier| {
        if later.timestamp == earlier.timestamp {
            std::mem::swap(later, earlier);
            true
        } else {
            false
        }
    });
    let mut observations = Vec::with_capacity(rows.len());
    for obs in rows {
        if let Some(prev) = observations.last().map(|o: &HourlyObservation| o.timestamp) {
            let mut next = prev + Duration::hours(1);
            while next < obs.timestamp {
                observations.push(HourlyObservation::empty(next));
                next += Duration::hours(1);
            }
        }
        observations.push(obs);
    }
    StationDataset {
        station_id: station_id.to_string(),
        observations,
    }
}

pub fn write_observations<W: Write>(writer: W, observations: &[HourlyObservation]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    csv.write_record(CSV_HEADER).map_err(io)?;
    for obs in observations {
        let mut record = Vec::with_capacity(CSV_HEADER.len());
        record.push(format_timestamp(&obs.timestamp));
        for field in Field::ALL {
            record.push(obs.get(field).map(|v| v.to_string()).unwrap_or_default());
        }
        csv.write_record(&record).map_err(io)?;
    }
    csv.flush()?;
    Ok(())
}

/// Parameters of the synthetic station generator.
///
/// Amplitudes and noise are fractions of each pollutant's base level. The
/// drift slope is in µg/m³ per hour for PM2.5 and scales with base level
/// for the other pollutants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub station_id: String,
    pub n_hours: usize,
    pub seed: u64,
    pub start: String,
    pub base_pm25: f64,
    pub base_pm10: f64,
    pub base_no2: f64,
    pub base_so2: f64,
    pub base_co: f64,
    pub base_o3: f64,
    pub diurnal_amplitude: f64,
    pub seasonal_amplitude: f64,
    /// Day of year at which the seasonal term peaks.
    pub seasonal_peak_day: f64,
    /// Scale of the annual cycle in the weather fields.
    pub met_seasonality: f64,
    pub noise_std: f64,
    pub missing_rate: f64,
    pub drift_start_hour: Option<usize>,
    pub drift_slope: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            station_id: "synthetic".into(),
            n_hours: 2000,
            seed: 0,
            start: "2017-01-01T00:00".into(),
            base_pm25: 90.0,
            base_pm10: 180.0,
            base_no2: 45.0,
            base_so2: 15.0,
            base_co: 40.0,
            base_o3: 30.0,
            diurnal_amplitude: 0.25,
            seasonal_amplitude: 0.35,
            seasonal_peak_day: 15.0,
            met_seasonality: 1.0,
            noise_std: 0.05,
            missing_rate: 0.0,
            drift_start_hour: None,
            drift_slope: 0.0,
        }
    }
}

impl SyntheticConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn base(&self, p: Pollutant) -> f64 {
        match p {
            Pollutant::Pm25 => self.base_pm25,
            Pollutant::Pm10 => self.base_pm10,
            Pollutant::No2 => self.base_no2,
            Pollutant::So2 => self.base_so2,
            Pollutant::Co => self.base_co,
            Pollutant::O3 => self.base_o3,
        }
    }

    pub fn validate(&self) -> Result<NaiveDateTime> {
        if self.n_hours < 48 {
            return Err(Error::InvalidConfig(format!("n_hours must be >= 48, got {}", self.n_hours)));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::InvalidConfig(format!(
                "missing_rate must lie in [0, 1), got {}",
                self.missing_rate
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig("noise_std must be >= 0".into()));
        }
        if !self.met_seasonality.is_finite() {
            return Err(Error::InvalidConfig("met_seasonality must be finite".into()));
        }
        if Pollutant::ALL.iter().any(|&p| !(self.base(p) >= 0.0)) {
            return Err(Error::InvalidConfig("base levels must be >= 0".into()));
        }
        parse_timestamp(&self.start)
            .ok_or_else(|| Error::InvalidConfig(format!("bad start timestamp `{}`", self.start)))
    }

    /// Noise-free pollutant level at hour index `t`.
    pub fn signal(&self, p: Pollutant, start: NaiveDateTime, t: usize) -> f64 {
        let ts = start + Duration::hours(t as i64);
        let base = self.base(p);
        let diurnal = self.diurnal_amplitude * base * (2.0 * PI * ts.hour() as f64 / 24.0).sin();
        let seasonal = self.seasonal_amplitude * base * self.seasonal_factor(&ts);
        let drift = match self.drift_start_hour {
            Some(s) if t > s && self.base_pm25 > 0.0 => {
                self.drift_slope * (base / self.base_pm25) * (t - s) as f64
            }
            _ => 0.0,
        };
        base + diurnal + seasonal + drift
    }

    fn seasonal_factor(&self, ts: &NaiveDateTime) -> f64 {
        (2.0 * PI * (ts.ordinal() as f64 - self.seasonal_peak_day) / 365.0).cos()
    }
}

/// Returns `(masked dataset, complete ground truth)`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(StationDataset, StationDataset)> {
    let start = config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut truth = Vec::with_capacity(config.n_hours);
    for t in 0..config.n_hours {
        let ts = start + Duration::hours(t as i64);
        let mut obs = HourlyObservation::empty(ts);
        for p in Pollutant::ALL {
            let noise = config.noise_std * config.base(p) * std_normal.sample(&mut rng);
            let value = (config.signal(p, start, t) + noise).max(0.0);
            obs.set(p.field(), Some(value));
        }
        let s = config.met_seasonality * config.seasonal_factor(&ts);
        let day = 2.0 * PI * ts.hour() as f64 / 24.0;
        let mut met = |f: Field, v: f64| obs.set(f, Some(v));
        let temperature = 25.0 - 10.0 * s - 5.0 * day.cos() + std_normal.sample(&mut rng);
        let humidity = (60.0 + 15.0 * s + 10.0 * day.cos() + 3.0 * std_normal.sample(&mut rng)).clamp(0.0, 100.0);
        let wind_speed = (3.0 - s + day.sin() + 0.5 * std_normal.sample(&mut rng)).max(0.0);
        let wind_direction = (180.0 + 90.0 * s + 40.0 * day.sin() + 20.0 * std_normal.sample(&mut rng)).rem_euclid(360.0);
        let pressure = 1008.0 + 8.0 * s + std_normal.sample(&mut rng);
        met(Field::Temperature, temperature);
        met(Field::Humidity, humidity);
        met(Field::WindSpeed, wind_speed);
        met(Field::WindDirection, wind_direction);
        met(Field::Pressure, pressure);
        truth.push(obs);
    }

    let mut masked = truth.clone();
    if config.missing_rate > 0.0 {
        for obs in &mut masked {
            for field in Field::ALL {
                if rng.random::<f64>() < config.missing_rate {
                    obs.set(field, None);
                }
            }
        }
    }
    let id = &config.station_id;
    Ok((
        StationDataset {
            station_id: id.clone(),
            observations: masked,
        },
        StationDataset {
            station_id: id.clone(),
            observations: truth,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> (StationDataset, Vec<Issue>) {
        parse_observations(text.as_bytes(), "s1").unwrap()
    }

    #[test]
    fn blank_cell_is_missing() {
        let (ds, _) = parse(
            "timestamp,pm25,pm10\n2017-01-01T00:00,10,20\n2017-01-01T01:00,,21\n2017-01-01T02:00,12,NA\n",
        );
        assert_eq!(ds.len(), 3);
        assert!((ds.coverage(Field::Pollutant(Pollutant::Pm25)) - 2.0 / 3.0).abs() < 1e-15);
        assert!((ds.coverage(Field::Pollutant(Pollutant::Pm10)) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ds.observations[1].pollutant(Pollutant::Pm25), None);
    }

    #[test]
    fn duplicate_hour_keeps_last() {
        let (ds, issues) = parse("timestamp,pm25\n2017-01-01T00:00,10\n2017-01-01T00:00,11\n");
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.observations[0].pollutant(Pollutant::Pm25), Some(11.0));
        assert_eq!(issues.iter().filter(|i| i.message.contains("duplicate")).count(), 1);
    }

    #[test]
    fn timestamp_only_file() {
        let (ds, issues) = parse("timestamp\n2017-01-01T00:00\n2017-01-01T01:00\n");
        assert_eq!(ds.len(), 2);
        for field in Field::ALL {
            assert_eq!(ds.missing_fraction(field), 1.0);
        }
        assert_eq!(issues.iter().filter(|i| i.message.contains("absent")).count(), 11);
    }

    #[test]
    fn negative_concentration_and_unknown_column() {
        let (ds, issues) = parse("timestamp,pm25,station_name\n2017-01-01T00:00,-3,x\n");
        assert_eq!(ds.observations[0].pollutant(Pollutant::Pm25), None);
        assert!(issues.iter().any(|i| i.message.contains("negative")));
        assert!(issues.iter().any(|i| i.message.contains("station_name")));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_observations("pm25\n1\n".as_bytes(), "s").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_observations("timestamp,pm25\n2017-01-01T00:00,1\nyesterday,2\n".as_bytes(), "s")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn grid_fills_gaps() {
        let (ds, _) = parse("timestamp,pm25\n2017-01-01T03:00,4\n2017-01-01T00:00,1\n2017-01-01T01:00,2\n");
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.observations[2], HourlyObservation::empty(parse_timestamp("2017-01-01T02:00").unwrap()));
        let single = regularize_grid("s", vec![HourlyObservation::empty(parse_timestamp("2017-01-01T00:00").unwrap())]);
        assert_eq!(single.len(), 1);
        let contiguous = regularize_grid("s", ds.observations.clone());
        assert_eq!(contiguous.observations, ds.observations);
    }

    #[test]
    fn synthetic_without_masking_equals_truth() {
        let cfg = SyntheticConfig {
            n_hours: 200,
            ..Default::default()
        };
        let (masked, truth) = generate_synthetic(&cfg).unwrap();
        assert_eq!(masked, truth);
        let (again, _) = generate_synthetic(&cfg).unwrap();
        assert_eq!(masked, again);
    }

    #[test]
    fn synthetic_mask_rate() {
        let cfg = SyntheticConfig {
            n_hours: 1000,
            missing_rate: 0.2,
            seed: 3,
            ..Default::default()
        };
        let (masked, _) = generate_synthetic(&cfg).unwrap();
        let missing: usize = masked
            .observations
            .iter()
            .map(|o| o.values.iter().filter(|v| v.is_none()).count())
            .sum();
        let rate = missing as f64 / (1000.0 * Field::COUNT as f64);
        assert!((rate - 0.2).abs() < 0.05, "{rate}");
    }

    #[test]
    fn synthetic_noise_is_centred() {
        let cfg = SyntheticConfig {
            n_hours: 5000,
            seed: 11,
            ..Default::default()
        };
        let start = cfg.validate().unwrap();
        let (_, truth) = generate_synthetic(&cfg).unwrap();
        for p in Pollutant::ALL {
            let n = truth.len() as f64;
            let residual_mean: f64 = truth
                .observations
                .iter()
                .enumerate()
                .map(|(t, o)| o.pollutant(p).unwrap() - cfg.signal(p, start, t))
                .sum::<f64>()
                / n;
            let sigma = cfg.noise_std * cfg.base(p);
            assert!(residual_mean.abs() <= 3.0 * sigma / n.sqrt(), "{p}: {residual_mean}");
        }
    }

    #[test]
    fn noise_free_mean_is_base_over_whole_days() {
        let cfg = SyntheticConfig {
            n_hours: 24 * 30,
            seasonal_amplitude: 0.0,
            ..Default::default()
        };
        let start = cfg.validate().unwrap();
        let mean = (0..cfg.n_hours).map(|t| cfg.signal(Pollutant::Pm25, start, t)).sum::<f64>() / cfg.n_hours as f64;
        assert!((mean - cfg.base_pm25).abs() < 1e-9);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SyntheticConfig { n_hours: 47, ..Default::default() },
            SyntheticConfig { missing_rate: 1.0, ..Default::default() },
            SyntheticConfig { start: "soon".into(), ..Default::default() },
        ] {
            assert!(matches!(generate_synthetic(&cfg), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn config_from_key_value_text() {
        let cfg = SyntheticConfig::from_toml_str("n_hours = 500\nseed = 9\nmissing_rate = 0.1\n").unwrap();
        assert_eq!((cfg.n_hours, cfg.seed, cfg.missing_rate), (500, 9, 0.1));
        assert_eq!(cfg.base_pm25, 90.0);
    }

    proptest! {
        #[test]
        fn csv_round_trip(seed in 0u64..1000, rate in 0.0f64..0.5) {
            let cfg = SyntheticConfig { n_hours: 60, seed, missing_rate: rate, ..Default::default() };
            let (ds, _) = generate_synthetic(&cfg).unwrap();
            let mut buf = Vec::new();
            ds.to_csv(&mut buf).unwrap();
            let (back, issues) = parse_observations(buf.as_slice(), &ds.station_id).unwrap();
            prop_assert!(issues.is_empty());
            prop_assert_eq!(back, ds);
        }

        #[test]
        fn grid_length(offsets in proptest::collection::btree_set(0i64..200, 1..40)) {
            let base = parse_timestamp("2017-06-01T00:00").unwrap();
            let rows: Vec<_> = offsets.iter().map(|&h| HourlyObservation::empty(base + Duration::hours(h))).collect();
            let first = *offsets.iter().next().unwrap();
            let last = *offsets.iter().last().unwrap();
            let ds = regularize_grid("s", rows);
            prop_assert_eq!(ds.len() as i64, last - first + 1);
            prop_assert!(ds.observations.windows(2).all(|w| w[1].timestamp - w[0].timestamp == Duration::hours(1)));
        }
    }
}
