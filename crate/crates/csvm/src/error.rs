//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by training, solving, calibration, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical operation failed (non-PSD matrix, singular factorization, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The constraints of an optimization problem cannot be satisfied.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Training could not produce a model.
    #[error("training failed: {0}")]
    Training(String),

    /// An input file does not match the documented schema.
    #[error("schema mismatch: {0}")]
    Schema(String),

    /// Required columns are absent or misnamed.
    #[error("missing columns: {0}")]
    MissingColumns(String),

    /// A model and a dataset disagree on dimensions or kernel.
    #[error("model/data mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
