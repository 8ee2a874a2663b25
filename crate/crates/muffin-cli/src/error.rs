//! CLI failure taxonomy: every error is classified as a configuration,
//! I/O, or numerical failure so the process can exit with a distinct code
//! per class (scripts dispatch on the exit code, not on message text).

use muffin_core::CoreError;
use std::process::ExitCode;

/// Successful run.
pub const EXIT_OK: u8 = 0;
/// Invalid or inconsistent configuration (bad field values, missing inputs).
pub const EXIT_CONFIG: u8 = 2;
/// Filesystem or data-format failures on otherwise valid configuration.
pub const EXIT_IO: u8 = 3;
/// Numerical failures: non-finite data or iterates, violated invariants.
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(EXIT_CONFIG),
            CliError::Io(_) => ExitCode::from(EXIT_IO),
            CliError::Numerical(_) => ExitCode::from(EXIT_NUMERICAL),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(_) | CoreError::MalformedHeader(_) | CoreError::PayloadSizeMismatch { .. } => {
                CliError::Io(e.to_string())
            }
            CoreError::NonFinite { .. } | CoreError::Numerical(_) => CliError::Numerical(e.to_string()),
            CoreError::InvalidArgument(_) | CoreError::DimensionMismatch(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("JSON: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
