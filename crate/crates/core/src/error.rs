use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("fingerprint mismatch: {0}")]
    FingerprintMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported model file version {found} (this build reads {supported})")]
    Version { found: u32, supported: u32 },

    #[error("model file checksum mismatch")]
    Checksum,

    #[error("model file malformed: {0}")]
    Format(String),

    #[error("malformed json: {0}")]
    Json(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("not found: {0}")]
    NotFound(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
