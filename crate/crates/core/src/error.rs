use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("snapshot has no edges")]
    EmptySnapshot,

    #[error("cannot add {requested} noise edges: only {available} node pairs are free")]
    SaturatedGraph { requested: usize, available: usize },

    #[error("invalid edge ({u}, {v}): {reason}")]
    InvalidEdge { u: usize, v: usize, reason: &'static str },

    #[error("snapshots disagree on node count: expected {expected}, found {found}")]
    NodeCountMismatch { expected: usize, found: usize },

    #[error("a dynamic graph needs at least one snapshot")]
    NoSnapshots,

    #[error("infeasible generator parameters: {0}")]
    InfeasibleParams(String),

    #[error("all rows are identical; no cluster structure to estimate")]
    DegenerateData,

    #[error("cluster {cluster} stayed empty after {reseeds} re-seeds")]
    EmptyCluster { cluster: usize, reseeds: usize },

    #[error("non-finite value in {0}")]
    NonFiniteLoss(&'static str),

    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("cannot split {available} nodes into {requested} subsets")]
    TooManySubsets { requested: usize, available: usize },

    #[error("eigensolver did not converge (dimension {0})")]
    ConvergenceFailure(usize),

    #[error("partitions have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("selective factorization needs factors from the previous timestamp")]
    MissingPrevFactors,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("snapshot {timestamp}: {source}")]
    AtSnapshot {
        timestamp: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps the error with the 1-based timestamp it occurred at.
    pub fn at_snapshot(self, timestamp: usize) -> Self {
        Error::AtSnapshot { timestamp, source: Box::new(self) }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
