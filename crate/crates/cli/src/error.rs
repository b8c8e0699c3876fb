use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input, with the 1-based line it was found on.
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("invalid model file {path}: {source}")]
    Model {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Core(#[from] bcrf_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_FORMAT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_CONFLICT: i32 = 4;

impl CliError {
    pub fn format(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use bcrf_core::Error as E;
        match self {
            CliError::Format { .. } | CliError::Model { .. } => EXIT_FORMAT,
            CliError::Conflict(_) => EXIT_CONFLICT,
            CliError::Core(e) if e.is_infeasible() => EXIT_INFEASIBLE,
            CliError::Core(E::ForbiddenInMeanField { .. } | E::WrongSupervision { .. } | E::InvalidConfig(_)) => {
                EXIT_CONFLICT
            }
            CliError::Core(_) | CliError::Io { .. } | CliError::Other(_) => EXIT_FAILURE,
        }
    }
}
