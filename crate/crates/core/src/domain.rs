//! Domain types shared by every stage: pollutants, observation records,
//! min-max normalization, pollution level thresholds and calendar encodings.

use std::fmt;

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timestamp format used on the wire (`YYYY-MM-DDTHH:00`).
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pollutant {
    #[serde(rename = "pm25")]
    Pm25,
    #[serde(rename = "pm10")]
    Pm10,
    #[serde(rename = "no2")]
    No2,
    #[serde(rename = "so2")]
    So2,
    #[serde(rename = "co")]
    Co,
    #[serde(rename = "o3")]
    O3,
}

impl Pollutant {
    pub const ALL: [Pollutant; 6] = [
        Pollutant::Pm25,
        Pollutant::Pm10,
        Pollutant::No2,
        Pollutant::So2,
        Pollutant::Co,
        Pollutant::O3,
    ];

    /// Pollutants the network forecasts, in output order.
    pub const FORECAST: [Pollutant; 3] = [Pollutant::Pm25, Pollutant::Pm10, Pollutant::No2];

    pub fn column_name(self) -> &'static str {
        match self {
            Pollutant::Pm25 => "pm25",
            Pollutant::Pm10 => "pm10",
            Pollutant::No2 => "no2",
            Pollutant::So2 => "so2",
            Pollutant::Co => "co",
            Pollutant::O3 => "o3",
        }
    }

    pub fn field(self) -> Field {
        Field::Pollutant(self)
    }

    /// Number of pollution level classes, for forecast targets only.
    pub fn level_count(self) -> Option<usize> {
        match self {
            Pollutant::Pm25 | Pollutant::Pm10 => Some(3),
            Pollutant::No2 => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for Pollutant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Pollutant::Pm25 => "PM2.5",
            Pollutant::Pm10 => "PM10",
            Pollutant::No2 => "NO2",
            Pollutant::So2 => "SO2",
            Pollutant::Co => "CO",
            Pollutant::O3 => "O3",
        };
        f.write_str(name)
    }
}

/// One of the eleven measured quantities of a station hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Pollutant(Pollutant),
    Temperature,
    Humidity,
    WindSpeed,
    WindDirection,
    Pressure,
}

impl Field {
    pub const COUNT: usize = 11;

    /// Schema order, identical to the CSV column order.
    pub const ALL: [Field; 11] = [
        Field::Pollutant(Pollutant::Pm25),
        Field::Pollutant(Pollutant::Pm10),
        Field::Pollutant(Pollutant::No2),
        Field::Pollutant(Pollutant::So2),
        Field::Pollutant(Pollutant::Co),
        Field::Pollutant(Pollutant::O3),
        Field::Temperature,
        Field::Humidity,
        Field::WindSpeed,
        Field::WindDirection,
        Field::Pressure,
    ];

    pub fn index(self) -> usize {
        match self {
            Field::Pollutant(p) => p as usize,
            Field::Temperature => 6,
            Field::Humidity => 7,
            Field::WindSpeed => 8,
            Field::WindDirection => 9,
            Field::Pressure => 10,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::Pollutant(p) => p.column_name(),
            Field::Temperature => "temperature",
            Field::Humidity => "humidity",
            Field::WindSpeed => "wind_speed",
            Field::WindDirection => "wind_direction",
            Field::Pressure => "pressure",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn is_pollutant(self) -> bool {
        matches!(self, Field::Pollutant(_))
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One station hour of raw readings. Any field may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyObservation {
    pub timestamp: NaiveDateTime,
    pub values: [Option<f64>; Field::COUNT],
}

impl HourlyObservation {
    pub fn empty(timestamp: NaiveDateTime) -> Self {
        HourlyObservation {
            timestamp,
            values: [None; Field::COUNT],
        }
    }

    pub fn get(&self, field: Field) -> Option<f64> {
        self.values[field.index()]
    }

    pub fn set(&mut self, field: Field, value: Option<f64>) {
        self.values[field.index()] = value;
    }

    pub fn pollutant(&self, p: Pollutant) -> Option<f64> {
        self.get(p.field())
    }

    pub fn is_hour_aligned(&self) -> bool {
        self.timestamp.minute() == 0 && self.timestamp.second() == 0 && self.timestamp.nanosecond() == 0
    }
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let ts = NaiveDateTime::parse_from_str(text.trim(), TIMESTAMP_FORMAT).ok()?;
    (ts.minute() == 0 && ts.second() == 0).then_some(ts)
}

/// Observed range of a single feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(name: &str, values: impl IntoIterator<Item = f64>) -> Result<MinMax> {
        let mut range: Option<MinMax> = None;
        for v in values.into_iter().filter(|v| v.is_finite()) {
            range = Some(match range {
                None => MinMax { min: v, max: v },
                Some(r) => MinMax {
                    min: r.min.min(v),
                    max: r.max.max(v),
                },
            });
        }
        range.ok_or_else(|| Error::EmptyFeature(name.to_string()))
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    /// Maps into `[0, 1]`, clamping values outside the fitted range.
    /// A constant feature maps to `0.0`.
    pub fn normalize(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("{x}")));
        }
        Ok(self.scale(x).clamp(0.0, 1.0))
    }

    /// The affine map without clamping.
    pub fn scale(&self, x: f64) -> f64 {
        let span = self.span();
        if span > 0.0 {
            (x - self.min) / span
        } else {
            0.0
        }
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        self.min + u * self.span()
    }
}

/// Per-feature min/max for the `[0, 1]` mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NormalizationSpec {
    pub features: Vec<(String, MinMax)>,
}

impl NormalizationSpec {
    pub fn get(&self, name: &str) -> Option<&MinMax> {
        self.features.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn require(&self, name: &str) -> Result<&MinMax> {
        self.get(name)
            .ok_or_else(|| Error::SchemaMismatch(format!("normalizer has no entry for `{name}`")))
    }
}

/// Fits one range per named feature column.
pub fn fit_normalizer<'a, I, V>(columns: I) -> Result<NormalizationSpec>
where
    I: IntoIterator<Item = (&'a str, V)>,
    V: IntoIterator<Item = f64>,
{
    let features = columns
        .into_iter()
        .map(|(name, values)| MinMax::fit(name, values).map(|r| (name.to_string(), r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalizationSpec { features })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollutionLevel {
    pub pollutant: Pollutant,
    pub class_index: u8,
}

impl PollutionLevel {
    pub fn name(&self) -> &'static str {
        match (self.pollutant, self.class_index) {
            (_, 0) => "low",
            (Pollutant::No2, _) => "high",
            (_, 1) => "moderate",
            _ => "high",
        }
    }
}

/// Upper class boundaries (left-closed, right-open bands).
fn level_bounds(pollutant: Pollutant) -> Option<&'static [f64]> {
    match pollutant {
        Pollutant::Pm25 => Some(&[60.0, 150.0]),
        Pollutant::Pm10 => Some(&[100.0, 250.0]),
        Pollutant::No2 => Some(&[50.0]),
        _ => None,
    }
}

pub fn classify_level(pollutant: Pollutant, concentration: f64) -> Result<PollutionLevel> {
    let bounds = level_bounds(pollutant).ok_or_else(|| Error::UnsupportedPollutant {
        pollutant: pollutant.to_string(),
    })?;
    if !concentration.is_finite() {
        return Err(Error::NonFinite(pollutant.to_string()));
    }
    if concentration < 0.0 {
        return Err(Error::NegativeConcentration {
            pollutant: pollutant.to_string(),
            value: concentration,
        });
    }
    let class_index = bounds.iter().take_while(|&&b| concentration >= b).count() as u8;
    Ok(PollutionLevel {
        pollutant,
        class_index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Monsoon,
    Autumn,
}

impl Season {
    pub const ALL: [Season; 5] = [
        Season::Winter,
        Season::Spring,
        Season::Summer,
        Season::Monsoon,
        Season::Autumn,
    ];

    pub fn from_month(month: u32) -> Season {
        match month {
            12 | 1 => Season::Winter,
            2 | 3 => Season::Spring,
            4..=6 => Season::Summer,
            7..=9 => Season::Monsoon,
            10 | 11 => Season::Autumn,
            _ => panic!("month out of range: {month}"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Monsoon => "monsoon",
            Season::Autumn => "autumn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeFeatures {
    pub hour_of_day: u32,
    pub month: u32,
    pub season: Season,
}

impl TimeFeatures {
    /// Model inputs: `hour / 23` and `(month - 1) / 11`.
    pub fn scaled(&self) -> [f64; 2] {
        [
            self.hour_of_day as f64 / 23.0,
            (self.month - 1) as f64 / 11.0,
        ]
    }
}

pub fn encode_time(ts: &NaiveDateTime) -> TimeFeatures {
    let month = ts.month();
    TimeFeatures {
        hour_of_day: ts.hour(),
        month,
        season: Season::from_month(month),
    }
}
