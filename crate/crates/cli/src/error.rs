use std::path::PathBuf;

use movingwave_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(CoreError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// 2 for bad input, 3 for CFL, blowup or stalled iterations, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    /// Core errors raised while running: solver failures are numerical,
    /// everything else is a property of the input.
    pub fn from_core(field: &str, err: CoreError) -> Self {
        match err {
            CoreError::CflViolation { .. } | CoreError::UnstableBlowup { .. } | CoreError::NoConvergence { .. } => {
                CliError::Numerical(err)
            }
            other => CliError::validation(field, other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
