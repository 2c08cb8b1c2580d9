use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("modulus {0} is below 2")]
    ModulusTooSmall(u64),

    #[error("group order exceeds 2^48")]
    GroupTooLarge,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("heat kernel numerically unstable: {0}")]
    Numerical(String),

    #[error("target entropy {target} unreachable below t = 2^60")]
    Unreachable { target: f64 },

    #[error("pmf underflow: coordinate {value} has zero probability at s = {s}")]
    PmfUnderflow { value: i64, s: f64 },

    #[error("instance too large for exhaustive computation: {0}")]
    ScaleCap(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("job exceeds budget: {estimated:.3e} butterfly-equivalents > {limit:.1e} (use --force)")]
    Budget { estimated: f64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
