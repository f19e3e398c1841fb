//! Benchmark runner and command line front end for `hera-core`.

pub mod cli;
pub mod config;
pub mod report;
pub mod runner;

pub use cli::cli_main;
pub use config::ExperimentConfig;
pub use runner::{run_experiment, summarize, CellResult, ResultRow, Stat, SummaryRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("every cell of the sweep is infeasible")]
    AllInfeasible,
    #[error(transparent)]
    Core(#[from] hera_core::Error),
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}

impl BenchError {
    /// 1 for usage and configuration problems, 2 for unreadable or corrupt
    /// files, 3 when nothing in a sweep fits its budget.
    pub fn exit_code(&self) -> i32 {
        use hera_core::Error as E;
        match self {
            BenchError::Usage(_) | BenchError::Config(_) => 1,
            BenchError::Io(_) => 2,
            BenchError::AllInfeasible => 3,
            BenchError::Core(e) => match e {
                E::Io(_) | E::Corrupt(_) | E::Checksum { .. } | E::CodeOutOfRange { .. } => 2,
                _ => 1,
            },
        }
    }
}
