use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("no layers")]
    NoLayers,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("zero total variance")]
    ZeroVariance,

    #[error("divergence at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("bad magic")]
    BadMagic,

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("dimension overflow: {rows} x {cols}")]
    DimensionOverflow { rows: u64, cols: u64 },

    #[error("reserved header field is non-zero")]
    ReservedField,

    #[error("{actual} trailing bytes after payload")]
    TrailingData { actual: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numerics rather than bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::NonFinite(_) | Error::ZeroVariance | Error::ZeroNorm
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Json { .. }
                | Error::BadMagic
                | Error::Truncated { .. }
                | Error::DimensionOverflow { .. }
                | Error::ReservedField
                | Error::TrailingData { .. }
        )
    }
}
