use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("variable {var} has lower bound {lower} above upper bound {upper}")]
    InvalidBounds { var: usize, lower: f64, upper: f64 },
    #[error("index {index} out of range for {what} (len {len})")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
