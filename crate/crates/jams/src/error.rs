//! Command errors and their exit codes.

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("numeric failure: {0}")]
    Numeric(jams_core::Error),
    #[error("{failed} of {total} replications failed")]
    PartialFailure { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// 2 for bad input, 3 for a numeric abort, 4 when some replications failed.
    /// Unreadable or unwritable files count as bad input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
            CliError::PartialFailure { .. } => 4,
        }
    }
}

impl From<jams_core::Error> for CliError {
    fn from(e: jams_core::Error) -> Self {
        use jams_core::Error as E;
        match e {
            E::Config(_) | E::InvalidData(_) | E::DimensionMismatch { .. } => CliError::Config(e.to_string()),
            other => CliError::Numeric(other),
        }
    }
}
