use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix: zero pivot at index {0}")]
    Singular(usize),

    #[error("iterative solve stalled after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("solution diverged at step {step} (t = {t})")]
    Diverged { step: u64, t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
