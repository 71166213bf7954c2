use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { index: usize, num_nodes: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("feature class {class} of node {node} is not below num_classes={num_classes}")]
    FeatureOutOfRange {
        node: usize,
        class: usize,
        num_classes: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("histogram depth mismatch: {0} vs {1}")]
    DepthMismatch(usize, usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unknown head `{0}`")]
    UnknownHead(String),

    #[error("pattern {0} is not covered by the constructed model")]
    UnseenPattern(String),

    #[error("graph max degree {actual} exceeds the construction bound N={bound}")]
    DegreeBound { actual: usize, bound: usize },

    #[error("unsupported activation for this construction: {0}")]
    UnsupportedActivation(&'static str),

    #[error("gradient descent diverged after {0} steps")]
    Diverged(usize),

    #[error("graph with {0} nodes exceeds the max-clique size guard of 60")]
    CliqueGuard(usize),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("unknown recipe `{0}`")]
    UnknownRecipe(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
