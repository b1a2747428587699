use thiserror::Error;

#[derive(Debug, Error)]
pub enum DbpError {
    /// `dz̄_j ∧ dz̄_j = 0`; callers treat the term as zero.
    #[error("duplicate generator dz̄{0} in wedge product")]
    DuplicateGenerator(usize),

    #[error("multi-index {0:?} is not strictly increasing")]
    NotStrictlyIncreasing(Vec<usize>),

    #[error("factor index {index} out of range for m = {m}")]
    FactorOutOfRange { index: usize, m: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("reflection extension is not supported for shape {0}")]
    UnsupportedShape(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("grid too large: {nodes} nodes exceeds limit {limit}")]
    TooLarge { nodes: u128, limit: u128 },

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = DbpError> = std::result::Result<T, E>;
