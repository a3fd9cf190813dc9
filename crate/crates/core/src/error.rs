use std::path::PathBuf;

use crate::losses::BinaryLossKind;

/// Errors produced by the complementary-label toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("gradient of the {0} loss is not supported")]
    UnsupportedGradient(BinaryLossKind),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        /// 1-based data row (the header is row 0).
        row: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
