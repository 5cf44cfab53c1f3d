use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI run.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error(transparent)]
    Numerics(#[from] delaydense::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{0}")]
    Usage(String),

    /// Help or version text requested.
    #[error("{0}")]
    Help(String),
}

impl CliError {
    /// Process exit code: 2 for usage errors, 3 for numerical or I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Help(_) => 0,
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::Usage(_) => 2,
            CliError::Numerics(e) if !e.is_numerical() => 2,
            CliError::Numerics(_) | CliError::Io { .. } => 3,
        }
    }
}
