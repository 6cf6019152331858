use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("time {0} is not a grid point")]
    NotOnGrid(f64),

    #[error("invalid interval [{s}, {t}]")]
    InvalidInterval { s: f64, t: f64 },

    /// A parameter precondition failed. `condition` names the violated
    /// inequality, e.g. `δ−1/p>0`.
    #[error("condition {condition} violated ({detail})")]
    Condition { condition: String, detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{op} is not defined for {space} paths")]
    UnsupportedSpace { op: &'static str, space: String },

    #[error("invalid path value at index {index}: {reason}")]
    InvalidValue { index: usize, reason: String },

    #[error("{interior} interior points would give 2^{interior} partitions (limit {limit}); use the dynamic program")]
    TooManyPartitions { interior: usize, limit: usize },

    #[error("grids differ: {0}")]
    GridMismatch(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn condition(condition: &str, detail: impl Into<String>) -> Self {
        Error::Condition {
            condition: condition.to_string(),
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
