use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("evaluation failed at {location}: {reason}")]
    Evaluation { location: String, reason: String },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn eval(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Evaluation {
            location: location.into(),
            reason: reason.into(),
        }
    }
}
