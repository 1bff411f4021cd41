//! Read-only JSON forecast endpoint.
//!
//! `ForecastService` holds the model snapshot and one rolling buffer per
//! station. Requests read an immutable snapshot; a background task polls
//! the checkpoint and data files and swaps in new versions.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Forecaster;
use crate::domain::{format_timestamp, Pollutant};
use crate::error::{Error, Result};
use crate::ingest::{parse_observations, StationDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollutantForecast {
    pub pollutant: Pollutant,
    /// µg/m³; absent for classifier checkpoints.
    pub concentration: Option<f64>,
    pub level: u8,
    pub level_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonForecast {
    pub horizon_hours: usize,
    pub pollutants: Vec<PollutantForecast>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResponse {
    pub station_id: String,
    /// Last hour in the input buffer.
    pub generated_at: String,
    pub model: String,
    pub horizons: Vec<HorizonForecast>,
}

/// Forecast for the latest window of `recent`.
pub fn forecast_response(model: &Forecaster, recent: &StationDataset) -> Result<ForecastResponse> {
    let per_horizon = model.forecast(recent)?;
    let generated_at = recent
        .end()
        .map(|t| format_timestamp(&t))
        .ok_or_else(|| Error::Data("empty buffer".into()))?;
    Ok(ForecastResponse {
        station_id: recent.station_id.clone(),
        generated_at,
        model: model.predictor.kind_name().to_string(),
        horizons: model
            .schema
            .horizons
            .iter()
            .zip(per_horizon)
            .map(|(&h, row)| HorizonForecast {
                horizon_hours: h,
                pollutants: model
                    .schema
                    .targets
                    .iter()
                    .zip(row)
                    .map(|(&p, f)| PollutantForecast {
                        pollutant: p,
                        concentration: f.concentration,
                        level: f.level,
                        level_name: f.level_name,
                    })
                    .collect(),
            })
            .collect(),
    })
}

struct CachedBody {
    generation: u64,
    buffer_len: usize,
    last_hour: Option<chrono::NaiveDateTime>,
    status: u16,
    body: String,
}

struct Snapshot {
    model: Arc<Forecaster>,
    generation: u64,
}

/// Model snapshot plus rolling buffers, shared by all request handlers.
pub struct ForecastService {
    snapshot: RwLock<Snapshot>,
    buffers: RwLock<HashMap<String, Arc<StationDataset>>>,
    cache: Mutex<HashMap<String, CachedBody>>,
}

fn error_body(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

impl ForecastService {
    pub fn new(model: Forecaster) -> Self {
        ForecastService {
            snapshot: RwLock::new(Snapshot {
                model: Arc::new(model),
                generation: 0,
            }),
            buffers: RwLock::new(HashMap::new()),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> Arc<Forecaster> {
        self.snapshot.read().expect("snapshot lock").model.clone()
    }

    /// Replaces the model; in-flight requests keep the snapshot they took.
    pub fn swap_model(&self, model: Forecaster) {
        let mut snap = self.snapshot.write().expect("snapshot lock");
        snap.model = Arc::new(model);
        snap.generation += 1;
    }

    pub fn set_buffer(&self, data: StationDataset) {
        self.buffers
            .write()
            .expect("buffer lock")
            .insert(data.station_id.clone(), Arc::new(data));
    }

    pub fn stations(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.buffers.read().expect("buffer lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    /// HTTP status and JSON body for `GET /forecast/<station>`. Bodies are
    /// cached until the buffer gains an hour or the model changes.
    pub fn respond(&self, station: &str) -> (u16, String) {
        let Some(buffer) = self.buffers.read().expect("buffer lock").get(station).cloned() else {
            return (404, error_body(&format!("unknown station `{station}`")));
        };
        let (model, generation) = {
            let snap = self.snapshot.read().expect("snapshot lock");
            (snap.model.clone(), snap.generation)
        };
        let mut cache = self.cache.lock().expect("cache lock");
        if let Some(c) = cache.get(station) {
            if c.generation == generation && c.buffer_len == buffer.len() && c.last_hour == buffer.end() {
                return (c.status, c.body.clone());
            }
        }
        let need = model.schema.window;
        let (status, body) = if buffer.len() < need {
            (409, error_body(&format!("need {need}, have {}", buffer.len())))
        } else {
            match forecast_response(&model, &buffer) {
                Ok(r) => (200, serde_json::to_string(&r).expect("response serialises")),
                Err(e) => (422, error_body(&e.to_string())),
            }
        };
        cache.insert(
            station.to_string(),
            CachedBody {
                generation,
                buffer_len: buffer.len(),
                last_hour: buffer.end(),
                status,
                body: body.clone(),
            },
        );
        (status, body)
    }

    pub fn health(&self) -> String {
        serde_json::json!({
            "status": "ok",
            "model": self.model().predictor.kind_name(),
            "stations": self.stations(),
        })
        .to_string()
    }
}

/// Files the poller watches. Each data file is one station's CSV; the file
/// stem is the station id.
#[derive(Debug, Clone)]
pub struct Sources {
    pub checkpoint: PathBuf,
    pub data: Vec<PathBuf>,
}

fn modified(path: &Path) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}

pub fn station_id_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "station".into())
}

pub fn load_station(path: &Path) -> Result<StationDataset> {
    let file = std::fs::File::open(path)?;
    let (data, issues) = parse_observations(file, &station_id_for(path))?;
    for issue in issues {
        log::debug!("{}: {issue:?}", path.display());
    }
    Ok(data)
}

/// Remembers file timestamps so only changed files are reloaded.
pub struct Poller {
    sources: Sources,
    seen: HashMap<PathBuf, SystemTime>,
}

impl Poller {
    pub fn new(sources: Sources) -> Self {
        Poller {
            sources,
            seen: HashMap::new(),
        }
    }

    /// Reloads changed files into `service`. Unreadable files keep the
    /// previous state.
    pub fn poll(&mut self, service: &ForecastService) {
        let checkpoint = self.sources.checkpoint.clone();
        if self.changed(&checkpoint) {
            match Forecaster::load(&checkpoint) {
                Ok(m) => {
                    if *service.model() != m {
                        log::info!("loaded new checkpoint {}", checkpoint.display());
                        service.swap_model(m);
                    }
                }
                Err(e) => log::warn!("checkpoint reload failed: {e}"),
            }
        }
        for path in self.sources.data.clone() {
            if self.changed(&path) {
                match load_station(&path) {
                    Ok(d) => service.set_buffer(d),
                    Err(e) => log::warn!("data reload failed for {}: {e}", path.display()),
                }
            }
        }
    }

    fn changed(&mut self, path: &Path) -> bool {
        match modified(path) {
            Some(t) if self.seen.get(path) != Some(&t) => {
                self.seen.insert(path.to_path_buf(), t);
                true
            }
            _ => false,
        }
    }
}

fn json(status: u16, body: String) -> impl IntoResponse {
    (
        StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
        [(header::CONTENT_TYPE, "application/json")],
        body,
    )
}

async fn forecast_handler(State(service): State<Arc<ForecastService>>, UrlPath(station): UrlPath<String>) -> impl IntoResponse {
    let (status, body) = tokio::task::spawn_blocking(move || service.respond(&station))
        .await
        .unwrap_or_else(|e| (500, error_body(&e.to_string())));
    json(status, body)
}

async fn health_handler(State(service): State<Arc<ForecastService>>) -> impl IntoResponse {
    json(200, service.health())
}

pub fn router(service: Arc<ForecastService>) -> Router {
    Router::new()
        .route("/forecast/{station_id}", get(forecast_handler))
        .route("/health", get(health_handler))
        .with_state(service)
}

/// Serves on `listener`, polling `sources` every `poll` when given.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Arc<ForecastService>,
    sources: Option<Sources>,
    poll: Duration,
) -> Result<()> {
    if let Some(sources) = sources {
        let svc = service.clone();
        tokio::spawn(async move {
            let mut poller = Poller::new(sources);
            let mut ticker = tokio::time::interval(poll);
            loop {
                ticker.tick().await;
                let s = svc.clone();
                poller = tokio::task::spawn_blocking(move || {
                    poller.poll(&s);
                    poller
                })
                .await
                .expect("poll task");
            }
        });
    }
    axum::serve(listener, router(service)).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::Predictor;
    use crate::domain::{classify_level, fit_normalizer};
    use crate::features::FeatureSchema;
    use crate::ingest::{generate_synthetic, SyntheticConfig};
    use crate::nn::{ModelConfig, ModelParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn service(hours: usize) -> ForecastService {
        let schema = FeatureSchema::new(vec!["pm25".into(), "pm10".into(), "no2".into(), "hour".into(), "month".into()])
            .unwrap();
        let cfg = ModelConfig {
            input_dim: 5,
            hidden_dim: 4,
            attention_dim: 3,
            ..ModelConfig::default()
        };
        let model = Forecaster {
            predictor: Predictor::Network(ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()),
            schema,
            normalizer: fit_normalizer(["pm25", "pm10", "no2"].iter().map(|n| (*n, vec![0.0, 300.0]))).unwrap(),
            imputer: None,
        };
        let svc = ForecastService::new(model);
        let (data, _) = generate_synthetic(&SyntheticConfig {
            station_id: "delhi".into(),
            n_hours: 100,
            ..SyntheticConfig::default()
        })
        .unwrap();
        svc.set_buffer(data.slice(0, hours));
        svc
    }

    #[test]
    fn unknown_station_is_404() {
        assert_eq!(service(30).respond("nowhere").0, 404);
    }

    #[test]
    fn short_buffer_is_409() {
        let (status, body) = service(23).respond("delhi");
        assert_eq!(status, 409);
        assert!(body.contains("need 24, have 23"));
    }

    #[test]
    fn valid_request_and_caching() {
        let svc = service(30);
        let (status, body) = svc.respond("delhi");
        assert_eq!(status, 200);
        let r: ForecastResponse = serde_json::from_str(&body).unwrap();
        assert_eq!(r.horizons.len(), 6);
        for h in &r.horizons {
            assert_eq!(h.pollutants.len(), 3);
            for p in &h.pollutants {
                let c = p.concentration.unwrap();
                assert!(c.is_finite() && c >= 0.0);
                assert_eq!(classify_level(p.pollutant, c).unwrap().class_index, p.level);
            }
        }
        assert_eq!(svc.respond("delhi").1, body);
    }

    #[test]
    fn swap_invalidates_cache() {
        let svc = service(30);
        let before = svc.respond("delhi").1;
        let mut m = (*svc.model()).clone();
        if let Predictor::Network(p) = &mut m.predictor {
            p.head_b.fill(0.3);
        }
        svc.swap_model(m);
        assert_ne!(svc.respond("delhi").1, before);
    }
}
