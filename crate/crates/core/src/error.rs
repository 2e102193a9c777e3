use chrono::{DateTime, Utc};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("active lifespan is zero days")]
    ZeroLifespan,
    #[error("last commit {last_commit} precedes creation {created_at}")]
    InvalidOrder {
        created_at: DateTime<Utc>,
        last_commit: DateTime<Utc>,
    },
    #[error("ratio denominator is zero")]
    ZeroTotal,
    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("empty sample")]
    EmptySample,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("bootstrap needs at least {min} iterations, got {got}")]
    InsufficientIterations { min: usize, got: usize },
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("column {0:?} has zero variance")]
    ZeroVariance(String),
    #[error("too few rows: {rows} rows for {columns} columns")]
    TooFewRows { rows: usize, columns: usize },
    #[error("matrix is singular or ill-conditioned")]
    SingularMatrix,
    #[error("fewer than three attributes survived screening: {0:?}")]
    EverythingRemoved(Vec<String>),
    #[error("invalid factor count: {0}")]
    InvalidFactorCount(String),
    #[error("factor extraction did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("value {value} at index {index} is not positive")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("no records carry a release date")]
    NoReleases,
    #[error("partition is degenerate: cutpoints {0:?} are not distinct")]
    DegeneratePartition(Vec<f64>),
    #[error("group {0} is empty")]
    EmptyGroup(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
