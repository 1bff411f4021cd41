pub mod baselines;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod features;
pub mod impute;
pub mod ingest;
pub mod nn;
pub mod pipeline;
pub mod server;

pub use error::{Error, Result};
