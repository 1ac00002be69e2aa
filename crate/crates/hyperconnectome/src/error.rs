//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants split into two families for the CLI's exit-code mapping:
/// contract/parameter violations (exit 1) and I/O or parse failures (exit 2).
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an operation's inputs was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An input vector has zero sample variance, so Pearson correlation
    /// is undefined. The caller decides the substitution.
    #[error("degenerate variance: input vector is constant")]
    DegenerateVariance,

    /// Too few samples for the requested operation.
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    /// Too few variables for the requested operation.
    #[error("insufficient variables: need at least {needed}, got {got}")]
    InsufficientVariables { needed: usize, got: usize },

    /// Training labels contain a single class.
    #[error("degenerate labels: training data contains a single class")]
    DegenerateLabels,

    /// A file could not be parsed; carries the location of the failure.
    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 for contract/parameter
    /// violations, 2 for I/O and parse failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_)
            | Error::DegenerateVariance
            | Error::InsufficientSamples { .. }
            | Error::InsufficientVariables { .. }
            | Error::DegenerateLabels => 1,
            Error::Parse { .. } | Error::Io { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
