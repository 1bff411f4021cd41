//! Model checkpoints.
//!
//! Layout: the magic bytes `AEROADAPT1`, a little-endian `u64` header
//! length, a JSON header, then the parameter payload as little-endian
//! `f64`. The header carries the model configuration, the feature schema,
//! the normaliser and the imputer so a checkpoint is self-contained.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{OutputKind, RandomForest};
use crate::domain::{Field, NormalizationSpec};
use crate::error::{Error, Result};
use crate::features::{level_from_normalized, window_inputs, CompletedDataset, FeatureSchema};
use crate::impute::ImputationModel;
use crate::ingest::StationDataset;
use crate::nn::{Matrix, ModelConfig, ModelParams, Task};

pub const MAGIC: &[u8; 10] = b"AEROADAPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Network(ModelParams),
    /// Forest over row-major flattened windows.
    Forest(RandomForest),
}

impl Predictor {
    pub fn task(&self) -> Task {
        match self {
            Predictor::Network(p) => p.config.task,
            Predictor::Forest(f) => match f.kind {
                OutputKind::Regression { .. } => Task::Regression,
                OutputKind::Classification { .. } => Task::Classification,
            },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match (self, self.task()) {
            (Predictor::Network(_), Task::Regression) => "network-regression",
            (Predictor::Network(_), Task::Classification) => "network-classification",
            (Predictor::Forest(_), Task::Regression) => "forest-regression",
            (Predictor::Forest(_), Task::Classification) => "forest-classification",
        }
    }

    /// Normalised predictions, `H * 3`, clamped to `[0, 1]`.
    pub fn predict_regression(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        match self {
            Predictor::Network(p) => p.predict_regression(inputs),
            Predictor::Forest(f) => {
                if self.task() != Task::Regression {
                    return Err(Error::SchemaMismatch("forest is not a regressor".into()));
                }
                check_flat(f, inputs)?;
                Ok(f.predict_outputs(inputs.data())
                    .into_iter()
                    .map(|v| v.clamp(0.0, 1.0))
                    .collect())
            }
        }
    }

    /// Direct class predictions from a classifier, `H * 3`.
    pub fn predict_classes(&self, inputs: &Matrix) -> Result<Vec<u8>> {
        match self {
            Predictor::Network(p) => p.predict_classes(inputs),
            Predictor::Forest(f) => {
                if self.task() != Task::Classification {
                    return Err(Error::SchemaMismatch("forest is not a classifier".into()));
                }
                check_flat(f, inputs)?;
                Ok(f.predict_classes(inputs.data()))
            }
        }
    }
}

fn check_flat(forest: &RandomForest, inputs: &Matrix) -> Result<()> {
    if inputs.data().len() != forest.n_features {
        return Err(Error::SchemaMismatch(format!(
            "forest expects {} flattened inputs, got {}",
            forest.n_features,
            inputs.data().len()
        )));
    }
    Ok(())
}

/// A trained model with everything needed to turn raw recent hours into a
/// forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    pub predictor: Predictor,
    pub schema: FeatureSchema,
    pub normalizer: NormalizationSpec,
    /// Columns are field names in CSV order.
    pub imputer: Option<ImputationModel>,
}

/// One forecast value in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelForecast {
    /// µg/m³; absent for classifier checkpoints.
    pub concentration: Option<f64>,
    pub level: u8,
    pub level_name: String,
}

impl Forecaster {
    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        for name in self.schema.features.iter().chain(
            self.schema
                .targets
                .iter()
                .map(|p| p.column_name().to_string())
                .collect::<Vec<_>>()
                .iter(),
        ) {
            if Field::from_name(name).is_some() {
                self.normalizer.require(name)?;
            }
        }
        let outputs = self.schema.horizons.len() * self.schema.targets.len();
        match &self.predictor {
            Predictor::Network(p) => {
                p.config.validate()?;
                if p.config.input_dim != self.schema.input_dim() || p.config.horizons != self.schema.horizons.len() {
                    return Err(Error::SchemaMismatch(format!(
                        "network expects {} inputs / {} horizons, schema has {} / {}",
                        p.config.input_dim,
                        p.config.horizons,
                        self.schema.input_dim(),
                        self.schema.horizons.len()
                    )));
                }
            }
            Predictor::Forest(f) => {
                if f.n_features != self.schema.window * self.schema.input_dim() || f.outputs() != outputs {
                    return Err(Error::SchemaMismatch(format!(
                        "forest expects {} inputs / {} outputs, schema implies {} / {}",
                        f.n_features,
                        f.outputs(),
                        self.schema.window * self.schema.input_dim(),
                        outputs
                    )));
                }
            }
        }
        Ok(())
    }

    /// Completes the last `W` hours of `recent` with the stored imputer.
    pub fn complete_recent(&self, recent: &StationDataset) -> Result<CompletedDataset> {
        let w = self.schema.window;
        if recent.len() < w {
            return Err(Error::TooShort {
                required: w,
                actual: recent.len(),
            });
        }
        let tail = recent.slice(recent.len() - w, recent.len());
        complete_with(&tail, self.imputer.as_ref(), &self.schema.input_fields())
    }

    pub fn inputs_for(&self, recent: &StationDataset) -> Result<Matrix> {
        let data = self.complete_recent(recent)?;
        window_inputs(&data, &self.schema, &self.normalizer, data.len() - 1)
    }

    /// Forecast per horizon per target pollutant.
    pub fn forecast(&self, recent: &StationDataset) -> Result<Vec<Vec<LevelForecast>>> {
        let inputs = self.inputs_for(recent)?;
        self.forecast_inputs(&inputs)
    }

    pub fn forecast_inputs(&self, inputs: &Matrix) -> Result<Vec<Vec<LevelForecast>>> {
        let p = self.schema.targets.len();
        let mut out = Vec::with_capacity(self.schema.horizons.len());
        match self.predictor.task() {
            Task::Regression => {
                let u = self.predictor.predict_regression(inputs)?;
                for h in 0..self.schema.horizons.len() {
                    let mut row = Vec::with_capacity(p);
                    for (pi, pol) in self.schema.targets.iter().enumerate() {
                        let range = self.normalizer.require(pol.column_name())?;
                        let v = u[h * p + pi];
                        let concentration = range.denormalize(v).max(0.0);
                        let level = level_from_normalized(*pol, range, v)?;
                        row.push(LevelForecast {
                            concentration: Some(concentration),
                            level,
                            level_name: level_name(*pol, level),
                        });
                    }
                    out.push(row);
                }
            }
            Task::Classification => {
                let c = self.predictor.predict_classes(inputs)?;
                for h in 0..self.schema.horizons.len() {
                    out.push(
                        self.schema
                            .targets
                            .iter()
                            .enumerate()
                            .map(|(pi, pol)| LevelForecast {
                                concentration: None,
                                level: c[h * p + pi],
                                level_name: level_name(*pol, c[h * p + pi]),
                            })
                            .collect(),
                    );
                }
            }
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (network, forest, tensors, payload) = match &self.predictor {
            Predictor::Network(p) => {
                let named = p.named_tensors();
                let shapes = named
                    .iter()
                    .map(|(name, m)| TensorShape {
                        name: name.clone(),
                        rows: m.rows(),
                        cols: m.cols(),
                    })
                    .collect();
                let payload: Vec<f64> = named.iter().flat_map(|(_, m)| m.data().iter().copied()).collect();
                (Some(p.config.clone()), None, shapes, payload)
            }
            Predictor::Forest(f) => (
                None,
                Some(ForestHeader {
                    n_trees: f.trees.len(),
                    n_features: f.n_features,
                    outputs: f.kind.clone(),
                }),
                Vec::new(),
                f.to_preorder(),
            ),
        };
        let header = Header {
            version: FORMAT_VERSION,
            kind: self.predictor.kind_name().to_string(),
            network,
            forest,
            schema: self.schema.clone(),
            normalizer: self.normalizer.clone(),
            imputer: self.imputer.clone(),
            tensors,
            payload_len: payload.len(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + payload.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for v in payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(corrupt("missing magic bytes"));
        }
        let mut len_bytes = [0u8; 8];
        len_bytes.copy_from_slice(&bytes[MAGIC.len()..MAGIC.len() + 8]);
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let header_start = MAGIC.len() + 8;
        let payload_start = header_start
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| corrupt("header truncated"))?;
        let header: Header = serde_json::from_slice(&bytes[header_start..payload_start])
            .map_err(|e| Error::CorruptCheckpoint(format!("bad header: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion {
                found: header.version,
                expected: FORMAT_VERSION,
            });
        }
        let raw = &bytes[payload_start..];
        if raw.len() != header.payload_len * 8 {
            return Err(corrupt(&format!(
                "payload has {} bytes, header promises {}",
                raw.len(),
                header.payload_len * 8
            )));
        }
        let payload: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let predictor = match (header.network, header.forest) {
            (Some(config), None) => Predictor::Network(network_from(config, &header.tensors, &payload)?),
            (None, Some(fh)) => Predictor::Forest(RandomForest::from_preorder(
                &payload,
                fh.n_trees,
                fh.n_features,
                fh.outputs,
            )?),
            _ => return Err(corrupt("header must describe exactly one model")),
        };
        if predictor.kind_name() != header.kind {
            return Err(corrupt(&format!("kind `{}` does not match contents", header.kind)));
        }
        let forecaster = Forecaster {
            predictor,
            schema: header.schema,
            normalizer: header.normalizer,
            imputer: header.imputer,
        };
        forecaster.validate()?;
        Ok(forecaster)
    }

    /// Writes through a temporary file and renames, so readers never see a
    /// partial checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Forecaster::from_bytes(&fs::read(path)?)
    }
}

pub fn level_name(pollutant: crate::domain::Pollutant, level: u8) -> String {
    crate::domain::PollutionLevel {
        pollutant,
        class_index: level,
    }
    .name()
    .to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorShape {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ForestHeader {
    n_trees: usize,
    n_features: usize,
    outputs: OutputKind,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    kind: String,
    network: Option<ModelConfig>,
    forest: Option<ForestHeader>,
    schema: FeatureSchema,
    normalizer: NormalizationSpec,
    imputer: Option<ImputationModel>,
    tensors: Vec<TensorShape>,
    payload_len: usize,
}

fn network_from(config: ModelConfig, shapes: &[TensorShape], payload: &[f64]) -> Result<ModelParams> {
    let mut params = ModelParams::init(config, &mut ChaCha8Rng::seed_from_u64(0))?;
    let expected: Vec<(String, usize, usize)> = params
        .named_tensors()
        .into_iter()
        .map(|(n, m)| (n, m.rows(), m.cols()))
        .collect();
    if expected.len() != shapes.len()
        || expected
            .iter()
            .zip(shapes)
            .any(|((n, r, c), s)| *n != s.name || *r != s.rows || *c != s.cols)
    {
        return Err(Error::CorruptCheckpoint("tensor table does not match the configuration".into()));
    }
    let mut offset = 0;
    for m in params.tensors_mut() {
        let n = m.data().len();
        let chunk = payload
            .get(offset..offset + n)
            .ok_or_else(|| Error::CorruptCheckpoint("tensor payload truncated".into()))?;
        m.data_mut().copy_from_slice(chunk);
        offset += n;
    }
    if offset != payload.len() {
        return Err(Error::CorruptCheckpoint("trailing tensor payload".into()));
    }
    Ok(params)
}

/// Fills a raw dataset with `imputer` (when given) and checks that every
/// field in `required` ends up complete.
pub fn complete_with(
    data: &StationDataset,
    imputer: Option<&ImputationModel>,
    required: &[Field],
) -> Result<CompletedDataset> {
    let mut columns: BTreeMap<Field, Vec<f64>> = BTreeMap::new();
    if let Some(model) = imputer {
        let fields: Vec<Field> = model
            .columns
            .iter()
            .map(|c| {
                Field::from_name(&c.name).ok_or_else(|| Error::SchemaMismatch(format!("imputer column `{}`", c.name)))
            })
            .collect::<Result<_>>()?;
        let raw: Vec<Vec<Option<f64>>> = fields.iter().map(|f| data.column(*f)).collect();
        for (f, col) in fields.into_iter().zip(model.apply(&raw)?) {
            columns.insert(f, col);
        }
    }
    for &field in Field::ALL.iter() {
        if columns.contains_key(&field) {
            continue;
        }
        let raw = data.column(field);
        if raw.iter().all(Option::is_some) && !raw.is_empty() {
            columns.insert(field, raw.into_iter().flatten().collect());
        } else if required.contains(&field) {
            return Err(Error::Data(format!("`{field}` has gaps and no imputer covers it")));
        }
    }
    for field in required {
        if !columns.contains_key(field) {
            return Err(Error::Data(format!("`{field}` is unavailable")));
        }
    }
    Ok(CompletedDataset {
        station_id: data.station_id.clone(),
        timestamps: data.observations.iter().map(|o| o.timestamp).collect(),
        columns,
    })
}
