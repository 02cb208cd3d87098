//! Scenario runner for the teleportation simulator.
//!
//! Each subcommand of the `teleport` binary is a function in [`commands`];
//! [`pipeline`] holds the analysis chain and [`scenario`] the config schema.

pub mod commands;
pub mod manifest;
pub mod pipeline;
pub mod scenario;

use thiserror::Error;
use teleport_core::photonics_sim::{SimError, TtagError};
use teleport_core::timesync::SyncError;
use teleport_core::tomography::TomoError;

pub use scenario::Scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("clock synchronization failed: {0}")]
    Sync(#[from] SyncError),
    #[error("maximum-likelihood reconstruction did not converge for {0}")]
    NonConvergence(String),
    #[error("tomography: {0}")]
    Tomo(#[from] TomoError),
    #[error("simulation: {0}")]
    Sim(SimError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => CliError::Config(c.to_string()),
            other => CliError::Sim(other),
        }
    }
}

impl From<TtagError> for CliError {
    fn from(e: TtagError) -> Self {
        CliError::Format(e.to_string())
    }
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status: 2 config, 3 sync, 4 non-convergence, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Sync(_) => 3,
            CliError::NonConvergence(_) => 4,
            _ => 1,
        }
    }
}
