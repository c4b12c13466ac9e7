use std::path::PathBuf;

use spectradiag_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("JSON output: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn parse(path: &std::path::Path, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    /// 1 when an analysis rejected the data or a fit, 2 for input errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                CoreError::InvalidInput(_)
                | CoreError::InvalidArgument(_)
                | CoreError::DuplicateId { .. }
                | CoreError::MissingCells { .. }
                | CoreError::FullyMissingModel(_)
                | CoreError::NonFinite
                | CoreError::NotSymmetric => 2,
                _ => 1,
            },
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
