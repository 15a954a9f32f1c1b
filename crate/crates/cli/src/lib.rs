//! Command-line driver: scenario files, snapshot series on disk, and the
//! simulate, certify, convergence and prox-table commands.

pub mod commands;
pub mod scenario;
pub mod series;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use commands::{
    cmd_certify, cmd_convergence, cmd_prox_table, cmd_simulate, CertifyOutcome, ConvergenceReport, LevelRow,
    SimulateOutcome,
};
pub use scenario::{load_scenario, parse_scenario, parse_scenario_in, Scenario, Setup};
pub use series::{load_series, LoadedSeries, Manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_TOPOLOGY: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_CERTIFY_FAIL: i32 = 5;

/// A scenario error located at a 1-based line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Core(#[from] vflow_core::Error),

    #[error("series {}: {message}", path.display())]
    Series { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn series(path: &Path, message: impl Into<String>) -> Self {
        CliError::Series { path: path.to_path_buf(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => EXIT_PARSE,
            CliError::Core(vflow_core::Error::SelfIntersection { .. }) => EXIT_TOPOLOGY,
            CliError::Core(_) => EXIT_NUMERIC,
            CliError::Io { .. } | CliError::Series { .. } => EXIT_IO,
        }
    }
}
