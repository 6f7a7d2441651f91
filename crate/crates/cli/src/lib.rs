//! Experiment runner for the `q2q1-amg` solver: TOML configuration, problem
//! export/import in Matrix Market form, and CSV/plain-text reports.

pub mod config;
pub mod experiment;
pub mod files;

use std::path::PathBuf;

pub use config::{Config, ConfigError, Resolved};
pub use experiment::{run, Mode, Options, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: q2q1_amg::Error },
    #[error(transparent)]
    Solver(#[from] q2q1_amg::Error),
    #[error("{0}")]
    Inconsistent(String),
}
