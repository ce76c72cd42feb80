use thiserror::Error;

pub type Result<T> = std::result::Result<T, TspError>;

#[derive(Debug, Error)]
pub enum TspError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("tensor is not T-symmetric T-positive definite: {0}")]
    NotTSpd(String),

    #[error("inverse transform left an imaginary part of relative size {ratio:.3e}")]
    ImaginaryResidue { ratio: f64 },

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("all sampling weights are zero")]
    ZeroWeights,

    #[error("invalid sketch partition: {0}")]
    InvalidPartition(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("iteration diverged at t={iteration}: error grew by a factor {factor:.3e}")]
    Diverged { iteration: usize, factor: f64 },

    #[error("reference solution is zero")]
    ZeroReference,

    #[error("ensemble too small: need at least {needed} runs, got {got}")]
    InsufficientEnsemble { needed: usize, got: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
