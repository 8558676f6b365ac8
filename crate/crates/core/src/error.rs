use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid body specification: {0}")]
    InvalidSpec(String),

    #[error("affine map is singular or ill-conditioned (condition number {0:e})")]
    SingularMap(f64),

    #[error("point lies outside the body")]
    OutsideBody,

    #[error("kernel rejection sampling found no kernel point in {attempts} attempts")]
    KernelRejection { attempts: u64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("iteration cap exceeded: {0}")]
    IterationCap(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("volume phase ratio {ratio:.4} below 1/4 at phase {phase}")]
    PhaseRatio { phase: usize, ratio: f64 },

    #[error("chain stuck: acceptance rate {0:.2e}")]
    ChainStuck(f64),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
