use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the domain of a formula or operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Adaptive integration ran out of steps.
    #[error("convergence error after {steps} steps at r = {r:.6e}: {trace}")]
    Convergence { steps: usize, r: f64, trace: String },

    #[error("ill-conditioned extraction: {0}")]
    IllConditioned(String),

    /// Complex root search failed or left its trust region.
    #[error("level search failed: {0}")]
    Search(String),

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Unsupported(_) | Error::Io(_) | Error::Parse(_) => 2,
            Error::Convergence { .. }
            | Error::IllConditioned(_)
            | Error::Search(_)
            | Error::Consistency(_) => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
