use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid rating grid: {0}")]
    InvalidGrid(String),

    #[error("value {value} at index {index} is not on the rating grid")]
    OffGrid { index: usize, value: f64 },

    #[error("KL divergence is infinite: p[{index}] > 0 but q[{index}] = 0")]
    InfiniteDivergence { index: usize },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("label {label} out of range for m = {m}")]
    LabelOutOfRange { label: usize, m: usize },

    #[error("row for user {0} has no label")]
    MissingLabel(String),

    #[error("duplicate user id {0}")]
    DuplicateUser(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain too large: |X| = {size} exceeds {limit}")]
    DomainTooLarge { size: usize, limit: usize },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
