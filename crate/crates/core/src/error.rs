//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible rate targets: {0}")]
    InfeasibleRates(String),

    #[error(
        "bisection did not converge in {iterations} iterations: \
         bracket [{lo}, {hi}], residual {residual:e} (tolerance {tolerance:e})"
    )]
    BisectionNonConvergence {
        lo: f64,
        hi: f64,
        residual: f64,
        tolerance: f64,
        iterations: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("loss became NaN at epoch {epoch}")]
    NanLoss { epoch: usize },

    #[error("degenerate propensity target: all examples have t = {0}")]
    SingleClassPropensity(u8),

    #[error("labels contain a single class; need at least one positive and one negative")]
    SingleClassLabels,

    #[error("group {group} has single-class labels")]
    SingleClassGroup { group: u8 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("method subset is empty: {0}")]
    EmptyMethodSubset(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
