use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A sliding window does not yet hold enough samples.
    #[error("estimation not ready: {0}")]
    NotReady(&'static str),

    #[error("plant diverged at step {step}: {what}")]
    Divergence { step: usize, what: String },

    #[error("non-finite {quantity} at step {step}")]
    NonFinite { step: usize, quantity: &'static str },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
