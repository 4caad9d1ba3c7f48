use thiserror::Error;

use crate::graph::{EdgeId, Vertex};

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("edge {0:?} has nonpositive or non-finite conductance {1}")]
    BadConductance(EdgeId, f64),
    #[error("graph needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} out of range")]
    VertexOutOfRange(Vertex),
    #[error("unknown edge {0:?}")]
    UnknownEdge(EdgeId),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("vertex set is empty")]
    EmptySet,
    #[error("vertex sets overlap")]
    Overlap,
    #[error("demand vector does not sum to zero (sum = {0})")]
    UnbalancedDemand(f64),
    #[error("graph with {0} vertices exceeds dense solve cap {1}")]
    TooLarge(usize, usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("tree enumeration exceeded cap of {0} trees")]
    EnumerationCap(usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("empirical key outside the exact support")]
    KeySpaceMismatch,
    #[error("precision underflow while resolving sample interval")]
    PrecisionUnderflow,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
