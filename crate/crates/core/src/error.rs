use crate::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("protocol error at node {node}, round {round}: {message}")]
    Protocol {
        node: NodeId,
        round: usize,
        message: String,
    },

    #[error("protocol is not static: receive rounds of node {node} depend on private inputs")]
    NotStatic { node: NodeId },

    #[error("protocol/generator mismatch: {0}")]
    Mismatch(String),

    #[error("directed networks are not supported by {0}")]
    Directed(&'static str),

    #[error("virtual round {value} of node {node} lies outside the search window [{lo}, {hi}]")]
    Window {
        node: NodeId,
        value: usize,
        lo: usize,
        hi: usize,
    },

    #[error("history of node {node} is incomplete: missing token for round {round}")]
    IncompleteHistory { node: NodeId, round: usize },

    #[error("completion table is incomplete for node {node}")]
    IncompleteTable { node: NodeId },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
