//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by parsing, validation, and estimation operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Conversion between incompatible dimensions (power vs. energy).
    #[error("dimension mismatch: cannot convert {from} to {to} without a duration")]
    DimensionMismatch { from: String, to: String },

    /// A malformed input row, with its 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A required column was not found in a tabular input.
    #[error("missing column {wanted:?}; found columns: {found:?}")]
    MissingColumn { wanted: String, found: Vec<String> },

    /// The input contained no usable samples.
    #[error("no samples in input")]
    NoSamples,

    /// Two samples share a timestamp; the source is suspect.
    #[error("duplicate timestamp {timestamp} in trace")]
    DuplicateTimestamp { timestamp: f64 },

    /// A requested interval extends past the data. No extrapolation is done.
    #[error(
        "interval [{start}, {end}] not covered by data spanning [{data_start}, {data_end}]"
    )]
    NotCovered {
        start: f64,
        end: f64,
        data_start: f64,
        data_end: f64,
    },

    /// A trace or series violates its construction invariants.
    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    /// An operation precondition was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Baselines or run sets built with incompatible methods.
    #[error("method mismatch: {0}")]
    MethodMismatch(String),

    /// Comparing or combining estimates with different scope or basis.
    #[error("scope mismatch: {0}")]
    ScopeMismatch(String),

    /// A report failed validation; findings are listed.
    #[error("report failed validation: {}", .findings.join("; "))]
    ReportInvalid { findings: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
