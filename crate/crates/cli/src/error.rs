use std::fmt::Display;
use std::path::Path;

/// Failures grouped by how the process should exit.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration (exit code 1).
    #[error("{0}")]
    Usage(String),
    /// Missing or malformed input data (exit code 2).
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<biofuse_core::Error> for CliError {
    fn from(e: biofuse_core::Error) -> Self {
        match e {
            biofuse_core::Error::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

/// Attaches a file path to an IO-style error.
pub trait PathContext<T> {
    fn at(self, path: &Path, action: &str) -> CliResult<T>;
}

impl<T, E: Display> PathContext<T> for Result<T, E> {
    fn at(self, path: &Path, action: &str) -> CliResult<T> {
        self.map_err(|e| data(format!("cannot {action} {}: {e}", path.display())))
    }
}
