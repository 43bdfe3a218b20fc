use thiserror::Error;

/// Errors raised by the simulation kernels and the experiment runners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} exceeds the dense-matrix cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("empty keep set for partial trace")]
    EmptyKeep,

    #[error("operation requires {0}")]
    Unsupported(String),

    #[error("imaginary part {0:e} of a trace that must be real")]
    ComplexTrace(f64),

    #[error("negative denominator {value:e} for mask {mask} (state is not positive semidefinite)")]
    NegativeDenominator { mask: u64, value: f64 },

    #[error("negative probability {value:e} for outcome {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
