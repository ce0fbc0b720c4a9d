//! Command-line front end: config parsing, system resolution and the
//! `check`, `run`, `compare` and `convergence` commands.

pub mod commands;
pub mod config;
mod output;
pub mod system;

use std::path::PathBuf;

pub use config::{ExperimentConfig, PinningChoice, SystemSource};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] antireduce::Error),

    /// The command ran but a checked property did not hold.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            _ => 1,
        }
    }
}
