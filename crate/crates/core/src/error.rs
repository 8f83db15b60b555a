use std::time::Duration;

use thiserror::Error;

/// Failure reported while obtaining a single response from an evaluator.
///
/// The variants are kept distinct so that a run trace can tell a protocol
/// fault from a solver-side failure or a timeout.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("evaluator failed: {0}")]
    Failed(String),
    #[error("response contains a non-finite value at sample {index}")]
    NonFinite { index: usize },
    #[error("response length mismatch: expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("malformed response line: {0}")]
    Malformed(String),
    #[error("response id mismatch: expected {expected}, got {actual}")]
    IdMismatch { expected: u64, actual: u64 },
    #[error("evaluator reported an error: {0}")]
    Remote(String),
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("evaluator process exited")]
    ProcessExited,
    #[error("i/o error while talking to evaluator: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("evaluation failed at x = {x:?}: {source}")]
    Evaluation {
        x: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
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

pub type Result<T, E = Error> = std::result::Result<T, E>;
