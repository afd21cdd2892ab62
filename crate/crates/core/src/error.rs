use thiserror::Error;

/// Errors raised by the model, solvers and codecs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid patient type: {0}")]
    InvalidIndex(String),

    #[error("shape mismatch: expected {expected} counts, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("infeasible action: {0}")]
    Infeasible(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),

    #[error("configuration parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("refused: {0}")]
    GuardRefusal(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("singular RLS update in trajectory {trajectory} at step {step} (|q| = {denominator:e})")]
    SingularUpdate {
        trajectory: usize,
        step: usize,
        denominator: f64,
    },

    #[error("decode error: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
