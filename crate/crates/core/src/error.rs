use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("polynomial of degree {degree} does not fit a moment vector of degree {order}")]
    DegreeOverflow { degree: u32, order: u32 },

    #[error("relaxation order {k} is below the minimal order {d0}")]
    OrderTooLow { k: u32, d0: u32 },

    #[error("unknown LME kind `{0}`")]
    UnknownKind(String),

    #[error("constraints do not match the {kind} template: {reason}")]
    TemplateMismatch { kind: String, reason: String },

    #[error("minimizer extraction failed: {0}")]
    ExtractionFailed(String),

    #[error("numerical failure in SDP backend: {0}")]
    NumericalFailure(String),

    #[error("no admissible delta found after {0} shrinks")]
    DeltaSearchFailed(usize),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
