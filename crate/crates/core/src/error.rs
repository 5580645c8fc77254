use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or sizes of the inputs do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument or configuration value violates its contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A gradient tape was recorded against different parameters.
    #[error("stale tape: recorded at parameter version {recorded}, network is at {current}")]
    StaleTape { recorded: u64, current: u64 },

    /// Training produced a non-finite loss.
    #[error("loss diverged at stage {stage}, epoch {epoch}")]
    Diverged { stage: usize, epoch: usize },

    /// A file did not follow the expected layout.
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> Error {
        let path = path.into();
        move |source| Error::Json { path, source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Error {
        let path = path.into();
        move |source| Error::Csv { path, source }
    }
}
