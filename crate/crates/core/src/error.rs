use thiserror::Error;

/// Errors surfaced by every stage of the forecasting engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("feature `{0}` has no finite values")]
    EmptyFeature(String),

    #[error("non-finite value for `{0}`")]
    NonFinite(String),

    #[error("{pollutant} is not a forecast target")]
    UnsupportedPollutant { pollutant: String },

    #[error("negative concentration {value} for {pollutant}")]
    NegativeConcentration { pollutant: String, value: f64 },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("column `{0}` has no observed values")]
    FullyMissingColumn(String),

    #[error("dataset too short: need at least {required} hours, have {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("not enough samples: need at least {required}, have {actual}")]
    TooFewSamples { required: usize, actual: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("training diverged at epoch {epoch} (last finite epoch: {last_finite_epoch:?})")]
    Diverged {
        epoch: usize,
        last_finite_epoch: Option<usize>,
    },

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
