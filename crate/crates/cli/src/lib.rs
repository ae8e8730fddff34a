//! Batch execution front end: scenario ingestion (config file, presets,
//! flag overrides), replicate fan-out, and result export (CSV, JSON,
//! and plain plot-data files).

pub mod options;
pub mod presets;
pub mod runner;

use std::path::PathBuf;

use thiserror::Error;

pub use options::{load_scenarios, Overrides};
pub use presets::{Preset, Scenario};
pub use runner::{execute, run_scenario, ScenarioOutcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("--config and --preset cannot be combined")]
    ConflictingSources,
    #[error("{path}:{line}: {message}")]
    ConfigFile {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] twinbft::ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Exit code contract: 1 for validation problems, 2 for runtime
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConflictingSources
            | CliError::ConfigFile { .. }
            | CliError::Invalid(_)
            | CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
        }
    }
}
