use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("node id {id} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { id: usize, node_count: usize },

    #[error("requested {requested} negative pairs but only {available} non-edges are available")]
    InsufficientNegatives { requested: usize, available: usize },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("pair #{index}: {source}")]
    AtPair {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
