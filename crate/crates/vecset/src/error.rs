//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor/shape contract violations; message names both shapes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Malformed input files (OBJ, JSON, blobs).
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Structurally valid input that violates a data precondition
    /// (open mesh, empty geometry, missing cache, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Bad configuration: schema violations, inconsistent hyperparameters.
    #[error("config error: {0}")]
    Config(String),

    /// Numeric failure: non-finite values, ill-conditioned solves.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// API contract violation (e.g. backward on a non-scalar loss).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
