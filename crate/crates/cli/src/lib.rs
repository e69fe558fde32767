//! Experiment harness for the `cran_core` optimizer: TOML configuration,
//! figure presets, Monte Carlo sweeps written as CSV, and single-instance
//! solves.

pub mod config;
pub mod experiment;
pub mod solve;

pub use config::{ExperimentConfig, Scheme, Sweep, SweepVar};
pub use experiment::{run_experiment, universally_infeasible, write_csv, Row, RunOptions, HEADER};
pub use solve::{solve_once, SolveRecord};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cran_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Core(cran_core::Error::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}
