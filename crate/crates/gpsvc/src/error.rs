//! Error types shared across the crate.

use std::fmt;

/// A single data-validation violation, carrying enough indices to locate it.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Two containers that must share a row count do not.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A matrix or vector entry is NaN or infinite.
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },
    /// A container that must be non-empty is empty.
    Empty { what: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected {expected} rows, found {found}"),
            Violation::NonFinite { what, row, col } => {
                write!(f, "{what}: non-finite entry at (row {row}, col {col})")
            }
            Violation::Empty { what } => write!(f, "{what} must be non-empty"),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Input data failed validation; every violation is listed.
    #[error("invalid data: {}", format_violations(.0))]
    InvalidData(Vec<Violation>),

    /// An argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric computation failed (factorization, inversion, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Coordinate descent on the fixed effects did not converge; the last
    /// iterate is attached for diagnostics.
    #[error("coordinate descent did not converge after {sweeps} sweeps")]
    CdNonConvergence { sweeps: usize, last: Vec<f64> },
}

fn format_violations(list: &[Violation]) -> String {
    list.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
