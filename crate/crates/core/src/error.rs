use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid universe: {0}")]
    InvalidUniverse(String),
    #[error("cannot encode NaN")]
    NotANumber,
    #[error("element index {index} out of range for universe of {cardinality} elements")]
    OutOfRange { index: u64, cardinality: u64 },
    #[error("segment bounds out of order: {lo} >= {hi}")]
    SegmentOrder { lo: u64, hi: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("delta {delta} exceeds 2*alpha*n = {limit}")]
    DeltaTooLarge { delta: u64, limit: f64 },
    #[error("summary is empty")]
    EmptySummary,
    #[error("no tuple satisfies the rank window; summary invariant broken")]
    NoQualifyingTuple,
    #[error("sensitivity bound requires n > 1/alpha (n = {n}, alpha = {alpha})")]
    SensitivityUndefined { n: u64, alpha: f64 },
    #[error("first checkpoint {n_min} exceeds horizon {n_max}")]
    InsufficientHorizon { n_min: u64, n_max: u64 },
    #[error("empty input")]
    EmptyInput,
    #[error("snapshot decode: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
