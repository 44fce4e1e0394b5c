use std::path::PathBuf;

use crate::hypergraph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("node {node} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { node: u64, node_count: usize },

    #[error("activity type {activity_type} outside 1..={activity_types}")]
    InvalidActivityType {
        activity_type: u32,
        activity_types: u32,
    },

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),

    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),

    #[error("hyperedge of type {activity_type} has {members} member(s); at least 2 required")]
    SmallHyperedge { activity_type: u32, members: usize },

    #[error("hyperedge lists node {0} more than once")]
    DuplicateMember(NodeId),

    #[error("node {node} is not a member of the hyperedge")]
    NotAMember { node: NodeId },

    #[error("graph has {node_count} nodes; limit is {limit}")]
    GraphTooLarge { node_count: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("k = {k} must lie in 1..={node_count}")]
    SeedCountOutOfRange { k: usize, node_count: usize },

    #[error("walk store needs {required} bytes, budget is {budget}")]
    MemoryBudgetExceeded { required: u64, budget: u64 },

    #[error("zero denominator: baseline spread must be positive")]
    ZeroDenominator,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed input rather than by the library.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Stream(_))
    }
}
