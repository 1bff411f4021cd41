//! Flat key-value configuration covering every tunable default.
//!
//! ```toml
//! seed = 7
//! hidden_dim = 32
//! max_epochs = 50
//! missing_rate = 0.1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{ForestConfig, MaxFeatures};
use crate::error::{Error, Result};
use crate::features::{FeatureSchema, RankingMethod, DEFAULT_HORIZONS, DEFAULT_WINDOW};
use crate::impute::MiceConfig;
use crate::ingest::SyntheticConfig;
use crate::nn::{ModelConfig, Task};
use crate::pipeline::{AdaptiveConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    /// Generator settings, including the shared `seed` and `station_id`.
    #[serde(flatten)]
    pub synth: SyntheticConfig,

    pub window: usize,
    pub horizons: Vec<usize>,
    pub ranking_method: RankingMethod,
    pub ranking_horizon: usize,
    pub redundancy_threshold: f64,
    pub top_k: usize,

    pub mice_iterations: usize,
    pub mice_tolerance: f64,

    pub hidden_dim: usize,
    pub layers: usize,
    pub attention_dim: usize,
    pub bidirectional: bool,
    pub attention: bool,
    pub dropout: f64,
    pub candidate_recurrence: bool,

    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// `0` disables early stopping.
    pub patience: usize,
    pub clip_norm: f64,

    pub n_trees: usize,
    /// `0` means unlimited depth.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,

    pub period_hours: usize,
    pub adapt_max_epochs: usize,
    pub adapt_patience: usize,
    pub guard: bool,
    pub warm_start: bool,
    pub refit_normalizer: bool,
    pub final_periods: usize,

    pub bind: String,
    pub poll_seconds: u64,
}

impl Default for AppConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let forest = ForestConfig::default();
        let mice = MiceConfig::default();
        let adapt = AdaptiveConfig::default();
        AppConfig {
            synth: SyntheticConfig::default(),
            window: DEFAULT_WINDOW,
            horizons: DEFAULT_HORIZONS.to_vec(),
            ranking_method: RankingMethod::ForestImportance,
            ranking_horizon: 4,
            redundancy_threshold: 0.95,
            top_k: 11,
            mice_iterations: mice.n_iterations,
            mice_tolerance: mice.convergence_tol,
            hidden_dim: model.hidden_dim,
            layers: model.layers,
            attention_dim: model.attention_dim,
            bidirectional: model.bidirectional,
            attention: model.attention,
            dropout: model.dropout,
            candidate_recurrence: model.candidate_recurrence,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            max_epochs: train.max_epochs,
            patience: train.patience.unwrap_or(0),
            clip_norm: train.clip_norm,
            n_trees: forest.n_trees,
            max_depth: forest.max_depth.unwrap_or(0),
            min_samples_leaf: forest.min_samples_leaf,
            bootstrap: forest.bootstrap,
            period_hours: adapt.period_hours,
            adapt_max_epochs: adapt.train.max_epochs,
            adapt_patience: adapt.train.patience.unwrap_or(0),
            guard: adapt.guard,
            warm_start: adapt.warm_start,
            refit_normalizer: adapt.refit_normalizer,
            final_periods: adapt.final_periods,
            bind: "127.0.0.1:8080".into(),
            poll_seconds: 60,
        }
    }
}

impl AppConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: AppConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        AppConfig::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn seed(&self) -> u64 {
        self.synth.seed
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.forest_config().validate()?;
        self.mice_config().validate()?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("dropout must be in [0, 1)".into()));
        }
        if self.period_hours == 0 {
            return Err(Error::InvalidConfig("period_hours must be >= 1".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        Ok(())
    }

    /// Schema over `features` with the configured window and horizons.
    pub fn schema(&self, features: Vec<String>) -> Result<FeatureSchema> {
        let mut s = FeatureSchema::new(features)?;
        s.window = self.window;
        s.horizons = self.horizons.clone();
        s.validate()?;
        Ok(s)
    }

    pub fn model_config(&self, task: Task, input_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            hidden_dim: self.hidden_dim,
            layers: self.layers,
            attention_dim: self.attention_dim,
            bidirectional: self.bidirectional,
            attention: self.attention,
            dropout: self.dropout,
            task,
            candidate_recurrence: self.candidate_recurrence,
            horizons: self.horizons.len(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            patience: (self.patience > 0).then_some(self.patience),
            seed: self.seed(),
            clip_norm: self.clip_norm,
        }
    }

    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            max_depth: (self.max_depth > 0).then_some(self.max_depth),
            min_samples_leaf: self.min_samples_leaf,
            max_features: MaxFeatures::Sqrt,
            bootstrap: self.bootstrap,
            seed: self.seed(),
        }
    }

    pub fn mice_config(&self) -> MiceConfig {
        MiceConfig {
            n_iterations: self.mice_iterations,
            convergence_tol: self.mice_tolerance,
            seed: self.seed(),
        }
    }

    pub fn adaptive_config(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            period_hours: self.period_hours,
            train: TrainConfig {
                max_epochs: self.adapt_max_epochs,
                patience: (self.adapt_patience > 0).then_some(self.adapt_patience),
                ..self.train_config()
            },
            guard: self.guard,
            warm_start: self.warm_start,
            withhold: false,
            refit_normalizer: self.refit_normalizer,
            final_periods: self.final_periods,
        }
    }
}
