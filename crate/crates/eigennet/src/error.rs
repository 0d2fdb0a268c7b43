//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by dataset validation, linear-algebra routines, the
/// samplers, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a documented precondition (non-finite entries,
    /// labels outside {-1, +1}, empty matrices, and so on).
    #[error("invalid input: {0}")]
    Validation(String),

    /// Two arguments that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A caller broke an API contract that is not a plain shape or value
    /// check (negative `s` coordinates, non-finite initial log density, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration struct failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A CSV cell failed to parse; the location is 1-based.
    #[error("csv parse error at line {line}, field {field}: {message}")]
    CsvParse {
        line: usize,
        field: usize,
        message: String,
    },

    /// Cross-validation could not score any fold.
    #[error("cross-validation failed: {0}")]
    CrossValidation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
