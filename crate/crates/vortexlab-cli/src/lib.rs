//! Command implementations behind the `vortexlab` binary.
//!
//! Every command reads one TOML [`config::RunConfig`], validates it fully,
//! then writes its CSVs, a `manifest.toml` and a gnuplot script into the
//! output directory.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config or flags; exit code 1.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Collision, boundary approach or CFL guard; exit code 2.
    #[error("runtime guard: {0}")]
    Guard(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Guard(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn key(key: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Invalid(format!("{key}: {msg}"))
    }
}

impl From<vortexlab::Error> for CliError {
    fn from(e: vortexlab::Error) -> Self {
        use vortexlab::Error as E;
        match e {
            E::Collision { .. } | E::Boundary { .. } | E::Stability(_) | E::Tracking(_) => {
                CliError::Guard(e.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
