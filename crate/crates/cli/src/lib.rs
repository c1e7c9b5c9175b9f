//! Config-driven runner: executes experiments, persists their outputs and
//! renders reports and plot data from a run manifest.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod report;
pub mod run;

use thiserror::Error;

/// Environment variable selecting the worker thread count.
pub const THREADS_ENV: &str = "ZEROLAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{0} experiment(s) with missing outputs")]
    MissingOutputs(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::MissingOutputs(_) | CliError::Io(_) | CliError::Json(_) => 1,
        }
    }
}
