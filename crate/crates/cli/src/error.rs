use std::path::PathBuf;

use thiserror::Error;

use crate::ingest::IngestError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Ingest(#[from] IngestError),

    #[error(transparent)]
    Model(#[from] bmidas::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    /// Process exit code: 2 configuration or input error, 3 numerical
    /// failure, 4 IO error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Ingest(e) if e.is_io() => 4,
            CliError::Ingest(_) => 2,
            CliError::Model(bmidas::Error::Numerical { .. } | bmidas::Error::Domain(_)) => 3,
            CliError::Model(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Csv { source, .. } if source.is_io_error() => 4,
            CliError::Csv { .. } => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        CliError::Csv {
            path: path.into(),
            source,
        }
    }
}
