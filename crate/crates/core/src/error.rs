use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the data model, kernels, solver and detectors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("degenerate value range: min = max = {0}")]
    DegenerateRange(f64),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("payload size mismatch in {path}: header implies {expected} bytes, found {found}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("numerical failure at outer iteration {iteration}: {reason}")]
    Numeric { iteration: usize, reason: String },

    #[error("pixel ({row}, {col}) is closer than {margin} pixels to the image edge")]
    EdgePixel { row: usize, col: usize, margin: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True when the error originates from reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MalformedHeader { .. }
                | Error::UnsupportedFormat(_)
                | Error::SizeMismatch { .. }
                | Error::Parse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
