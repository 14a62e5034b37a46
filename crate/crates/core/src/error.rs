use thiserror::Error;

/// Errors produced by the orchestration library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported orbit model: {0}")]
    ModelUnsupported(String),

    #[error("undefined geometry: {0}")]
    UndefinedGeometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("link class mismatch: {0}")]
    ClassMismatch(String),

    #[error("missing parameter: {0}")]
    MissingParameter(String),

    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },

    #[error("unknown operator `{0}`")]
    UnknownOperator(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("policy `{0}` has no evaluation function")]
    NotAnEvaluation(String),

    #[error("relaxation target not found: {0}")]
    RelaxTarget(String),

    #[error("unbounded enumeration refused: {0}")]
    Unbounded(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
