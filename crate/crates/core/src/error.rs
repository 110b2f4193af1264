use std::fmt;

/// Failure modes shared by every evaluator in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {message}{}", NodeDisplay(.node))]
    NumericalFailure {
        message: String,
        node: Option<Vec<f64>>,
    },
    #[error("resource limit: {0}")]
    ResourceLimit(String),
}

struct NodeDisplay<'a>(&'a Option<Vec<f64>>);

impl fmt::Display for NodeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(node) => write!(f, " at node {node:?}"),
            None => Ok(()),
        }
    }
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure {
            message: msg.into(),
            node: None,
        }
    }

    pub fn resource(msg: impl Into<String>) -> Self {
        Error::ResourceLimit(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalFailure { .. } => 1,
            Error::InvalidArgument(_) => 2,
            Error::ResourceLimit(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
