use thiserror::Error;

/// Errors surfaced by the library. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, hyperparameters, or required inputs are inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data is malformed or degenerate.
    #[error("input error: {0}")]
    Input(String),

    /// A loss term or gradient became non-finite.
    #[error("numeric error in {term}: {detail}")]
    Numeric { term: String, detail: String },

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Checkpoint header does not match the expected layout.
    #[error("checkpoint version mismatch: {0}")]
    Version(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn numeric(term: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            term: term.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) => 2,
            Error::Input(_) | Error::Io(_) | Error::Json(_) | Error::Version(_) => 3,
            Error::Numeric { .. } => 4,
        }
    }
}
