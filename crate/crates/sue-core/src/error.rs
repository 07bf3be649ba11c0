//! Error types shared across the crate.

use alloc::string::String;
use core::fmt;

/// Numeric failure modes surfaced by the probability and special-function
/// evaluators. Callers that can fall back (the pmf dispatcher, the
/// likelihood's −∞ sentinel) do so; everything else propagates.
#[derive(Debug, Clone, PartialEq)]
pub enum NumericError {
    /// Input outside the function's domain (e.g. α = 1 in the direct pmf form).
    Domain(&'static str),
    /// A guarded evaluation produced a value that cannot be a probability;
    /// carries the offending value.
    Instability { what: &'static str, value: f64 },
    /// An iterative evaluation did not converge within its iteration cap.
    NonConvergence { what: &'static str, iterations: usize },
    /// Evaluation failed for a specific count; wraps the underlying error.
    AtCount { n: u64, source: alloc::boxed::Box<NumericError> },
    /// A linear predictor exceeded the exponentiation bound.
    Overflow { what: &'static str, value: f64 },
    /// The design matrix is rank-deficient; names the dependent columns.
    RankDeficient { columns: alloc::vec::Vec<String> },
    /// Gradient requested at a point where the likelihood is −∞.
    GradientAtSentinel,
}

impl fmt::Display for NumericError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericError::Domain(what) => write!(f, "domain error: {what}"),
            NumericError::Instability { what, value } => {
                write!(f, "numerical instability in {what}: got {value:e}")
            }
            NumericError::NonConvergence { what, iterations } => {
                write!(f, "{what} did not converge after {iterations} iterations")
            }
            NumericError::AtCount { n, source } => write!(f, "at n={n}: {source}"),
            NumericError::Overflow { what, value } => {
                write!(f, "overflow in {what}: exponent {value:e}")
            }
            NumericError::RankDeficient { columns } => {
                write!(f, "design matrix is rank-deficient; dependent columns: ")?;
                for (i, c) in columns.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            NumericError::GradientAtSentinel => {
                write!(f, "gradient requested where the log-likelihood is -inf")
            }
        }
    }
}

impl NumericError {
    pub fn at_count(self, n: u64) -> Self {
        NumericError::AtCount { n, source: alloc::boxed::Box::new(self) }
    }
}
