use thiserror::Error;

/// Errors raised by the quantization engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty support")]
    EmptySupport,

    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),

    #[error("use hard_assignment: the Gibbs density is undefined for lambda = 0")]
    ZeroLambda,

    #[error("invalid regularization parameter: {0}")]
    InvalidLambda(f64),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not a probability vector: {0}")]
    InvalidWeights(String),

    #[error("block {0} has no atoms")]
    EmptyBlock(usize),

    #[error("block index {index} out of range for {blocks} blocks")]
    BlockOutOfRange { index: usize, blocks: usize },

    #[error("cumulant expansion order must be 1, 2 or 3, got {0}")]
    InvalidOrder(u32),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("invalid distance: {0}")]
    InvalidDistance(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("measures are not over the same ground set")]
    GroundSetMismatch,

    #[error("marginal mismatch of {0:e}")]
    MarginalMismatch(f64),

    #[error("no convergence after {iterations} iterations (best value {best})")]
    NoConvergence { iterations: usize, best: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
