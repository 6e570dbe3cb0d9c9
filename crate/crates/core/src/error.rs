use thiserror::Error;

/// Errors raised by the flow library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {found} values but the grid has {expected} nodes")]
    GridMismatch { expected: usize, found: usize },

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },

    /// The support data does not describe a strictly convex body containing
    /// the origin in its interior.
    #[error("inadmissible body at node {node} (angle {angle:.6}): {reason}")]
    Inadmissible {
        node: usize,
        angle: f64,
        reason: String,
    },

    #[error("principal radii must be positive, got {0}")]
    NonPositiveRadius(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A time step left the admissible set and has to be retried smaller.
    #[error("step of size {dt:e} rejected: {reason}")]
    StepRejected { dt: f64, reason: String },

    #[error("root bracket not found: {0}")]
    NoBracket(String),
}

pub type Result<T> = std::result::Result<T, Error>;
