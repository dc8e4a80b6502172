use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate normalization: {0}")]
    Degenerate(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("sample {value} in dimension {dim} lies outside the grid [{lo}, {hi})")]
    OutOfGrid { dim: usize, value: f64, lo: f64, hi: f64 },

    #[error("offset {offset} lies outside the bin of half-width {epsilon}")]
    OutsideBin { offset: f64, epsilon: f64 },

    #[error("no accepted sample after {0} attempts; epsilon too small or dimension too high")]
    AttemptsExhausted(u64),

    #[error("every bandwidth candidate gives a non-finite validation log-likelihood")]
    NoFiniteBandwidth,

    #[error("unknown condition `{0}`")]
    UnknownCondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("scene `{scene}`: {message}")]
    InvalidScene { scene: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
