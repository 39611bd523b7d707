use chrono::{DateTime, Utc};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time series must contain at least one value")]
    EmptySeries,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("unsupported step of {0} minutes (expected one of 1, 15, 30, 60)")]
    InvalidStep(u32),

    #[error("series have no common time window")]
    EmptyIntersection,

    #[error("step mismatch: {0} min vs {1} min")]
    StepMismatch(u32, u32),

    #[error("target step {target} min does not divide source step {step} min")]
    NotDivisible { step: u32, target: u32 },

    #[error("series are not aligned (start, step and length must match)")]
    Misaligned,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("gap of {missing} missing intervals starting at {first_missing} exceeds the repair limit")]
    GapTooLong {
        first_missing: DateTime<Utc>,
        missing: usize,
    },

    #[error("invalid location: {0}")]
    InvalidLocation(String),

    #[error("invalid PV parameters: {0}")]
    InvalidParams(String),

    #[error("weather channel `{0}` is missing")]
    MissingChannel(&'static str),

    #[error("window contains no night intervals")]
    NoNightIntervals,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("generation envelope is identically zero")]
    DegenerateGeneration,

    #[error("proxy {index} is identically zero")]
    ZeroProxy { index: usize },

    #[error("proxy matrix needs at least one column")]
    NoProxies,

    #[error("too few rows to train the load model: {rows} (need at least {min})")]
    TooFewRows { rows: usize, min: usize },

    #[error("feature schema mismatch: model expects {expected:?}, got {actual:?}")]
    SchemaMismatch {
        expected: Vec<String>,
        actual: Vec<String>,
    },

    #[error("disaggregation diverged after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        trajectory: Vec<Vec<f64>>,
    },

    #[error("mean of the reference series is not positive")]
    ZeroMeanTruth,

    #[error("proxy pool too small: need {needed} candidate homes, have {available}")]
    PoolTooSmall { needed: usize, available: usize },

    #[error("disaggregation length {length} exceeds the window length {available}")]
    LengthTooLong { length: usize, available: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown unit `{0}`")]
    UnitUnknown(String),

    #[error("line {line}: timestamp is off the sampling grid")]
    NonUniformStep { line: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
