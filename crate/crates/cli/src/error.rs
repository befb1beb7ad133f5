use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown kernel `{0}` (expected an RBF name, `polynomial` or `quadratic`)")]
    UnknownKernel(String),

    #[error("results CSV schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Core(#[from] kmr_core::Error),

    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("malformed file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    /// 0 success, 2 invalid config, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use kmr_core::Error as E;
        match self {
            CliError::Config(_) | CliError::UnknownKernel(_) | CliError::Schema(_) => 2,
            CliError::Core(E::InvalidInput(_) | E::ShapeMismatch { .. }) => 2,
            CliError::Core(_) => 3,
            CliError::Io { .. } | CliError::Format { .. } => 4,
        }
    }
}
