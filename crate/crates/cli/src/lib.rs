//! Experiment runner for the `ratchet` command line tool.

pub mod config;
pub mod output;
pub mod report;
pub mod run;

pub use config::{Experiment, ExperimentConfig, Format, InitialState, Route};
pub use report::{compare_report, Comparison, RouteEstimate};
pub use run::{run_experiment, RunOutcome};

use ratchet_core::RatchetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Schema(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<RatchetError> for CliError {
    fn from(e: RatchetError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Exit status of a compare run whose deviations exceed the thresholds.
pub const EXIT_THRESHOLD: i32 = 3;
