use crate::mesh::Point2;
use thiserror::Error;

/// Coarse classification used by the command line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numerical,
    Hypothesis,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resource limit: {what} would need {requested}, cap is {cap}")]
    ResourceLimit {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("not elliptic at ({:.6}, {:.6}): {detail}", point.x1, point.x2)]
    NotElliptic { point: Point2, detail: String },

    #[error("coefficient evaluation failed at ({:.6}, {:.6}): {detail}", point.x1, point.x2)]
    Evaluation { point: Point2, detail: String },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidInput(_)
            | Error::NotElliptic { .. }
            | Error::Parse { .. }
            | Error::Io(_) => ErrorCategory::Config,
            Error::Hypothesis(_) => ErrorCategory::Hypothesis,
            Error::ResourceLimit { .. }
            | Error::Evaluation { .. }
            | Error::Singular(_)
            | Error::Numerical(_) => ErrorCategory::Numerical,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
