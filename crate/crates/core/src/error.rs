use thiserror::Error;

/// Errors shared across the forecasting library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("channel `{channel}` has length {got}, expected {expected}")]
    LengthMismatch {
        channel: String,
        got: usize,
        expected: usize,
    },
    #[error("timestamps are not strictly increasing at index {index}")]
    NonMonotonicTimestamps { index: usize },
    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),
    #[error("frame too short: {n} rows, need at least {need}")]
    TooShort { n: usize, need: usize },
    #[error("missing feature `{0}`")]
    MissingFeature(String),
    #[error("frame is empty")]
    EmptyFrame,
    #[error("aggregation group {group} larger than frame length {n}")]
    GroupTooLarge { group: usize, n: usize },
    #[error("missing channel `{0}`")]
    MissingChannel(String),
    #[error("insufficient data: {got} rows, need at least {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("degenerate design: only {distinct} distinct predictor values, need at least {need}")]
    DegenerateDesign { distinct: usize, need: usize },
    #[error("temperature channel `T` required for imputation but absent")]
    MissingTemperature,
    #[error("channel `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("channel `{0}` is constant; min-max scaling undefined")]
    ConstantChannel(String),
    #[error("no scaler statistics for channel `{0}`")]
    UnknownChannel(String),
    #[error("scaler has no statistics for target channel `{0}`")]
    MissingTargetStats(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty sample set: {0}")]
    EmptySet(String),
    #[error("forward caches do not match the batch: {0}")]
    CacheMismatch(String),
    #[error("vectors have different lengths: {0} vs {1}")]
    MetricLengthMismatch(usize, usize),
    #[error("empty metric input")]
    Empty,
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("ground truth has zero dynamic range; normalized accuracy undefined")]
    ZeroRange,
    #[error("day {day} has {got} values, expected {expected}")]
    BadLength {
        day: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite network output at forecast step {step}: {value}")]
    NonFiniteOutput { step: usize, value: f64 },
    #[error("imputer lacks a rule for channel `{0}`")]
    ImputerMissingChannel(String),
    #[error("scaler lacks statistics for channel `{0}`")]
    ScalerMissingChannel(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
