use chrono::{DateTime, Utc};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("input file is empty")]
    EmptyFile,
    #[error("required column {0:?} is missing from the header")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    ParseFailure { row: usize, message: String },
    #[error("invalid column mapping: {0}")]
    Mapping(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("rate limit exhausted until {reset_at}")]
    RateLimited { reset_at: DateTime<Utc> },
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("network failure: {0}")]
    NetworkFailure(String),
    #[error("unexpected response: {0}")]
    InvalidResponse(String),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;
