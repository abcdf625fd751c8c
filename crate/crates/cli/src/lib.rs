//! Experiment driver for the `decmac` solver: reads a TOML configuration,
//! runs single solves, budget sweeps and oracle comparisons, and writes
//! plot-ready CSV and JSON.

use std::path::PathBuf;

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{db_to_linear, load_config, parse_config, ExperimentConfig, OracleConfig, RateUnit, SweepConfig, UserConfig};
pub use experiment::{
    run_compare_oracle, run_solve, run_sweep, sweep, OracleKind, OracleReport, PointStatus, SweepRow, ORACLE_GAP_TOL,
};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Usage, configuration, solver or I/O error.
    pub const ERROR: i32 = 1;
    /// The run finished but did not converge, or an oracle comparison
    /// failed.
    pub const NOT_CONVERGED: i32 = 2;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] decmac::Error),

    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}
