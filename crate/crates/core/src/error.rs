use std::path::PathBuf;

use thiserror::Error;

use crate::model::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed model document at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("invariant violated: {what} at {at}")]
    Invariant { what: String, at: String },

    #[error("expression `{text}`: {source}")]
    Parse {
        text: String,
        #[source]
        source: ParseError,
    },

    #[error("non-finite value {value} at {at}")]
    NonFinite { value: f64, at: String },

    #[error("evaluation cap of {cap} exhausted (partial value {partial:.6e}, error {error:.3e})")]
    CapExhausted { cap: usize, partial: f64, error: f64 },

    #[error("pole of the gamma function at {0}")]
    GammaPole(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("divergent: {0}")]
    Divergent(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("not reversible: detailed balance fails between states {i} and {j} (defect {defect:.3e})")]
    NotReversible { i: usize, j: usize, defect: f64 },

    #[error("reducible generator: {0}")]
    Reducible(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("unsupported for this model family: {0}")]
    Unsupported(String),

    #[error("simulation failure: {0}")]
    Simulation(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invariant(what: impl Into<String>, at: impl Into<String>) -> Self {
        Error::Invariant {
            what: what.into(),
            at: at.into(),
        }
    }

    /// True for verdicts that mean "the series or integral is infinite", as
    /// opposed to a numerical or input failure.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergent(_))
    }
}
