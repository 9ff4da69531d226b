use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("covariance matrix is not symmetric positive definite")]
    Covariance,
    #[error("all weights are zero (log-weights are -inf)")]
    DegenerateWeights,
    #[error("empty weight vector")]
    EmptyWeights,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
