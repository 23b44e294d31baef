use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("oracle failed at epoch {epoch} (residual {residual:e})")]
    Oracle { epoch: usize, residual: f64 },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Game(#[from] cmg_core::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for oracle failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Oracle { .. } => 3,
            CliError::Io { .. } => 4,
            CliError::Game(cmg_core::Error::OracleFailed { .. }) => 3,
            CliError::Game(_) => 1,
        }
    }
}

/// Lifts oracle failures out of core errors.
pub(crate) fn from_core(e: cmg_core::Error) -> CliError {
    match e {
        cmg_core::Error::OracleFailed { epoch, residual } => CliError::Oracle { epoch, residual },
        other => CliError::Game(other),
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
