use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("row {row} references undeclared variable {var}")]
    UnknownVariable { row: usize, var: usize },
    #[error("variable {var} has lower bound {lower} above upper bound {upper}")]
    InvalidBounds { var: usize, lower: f64, upper: f64 },
    #[error("integer variable {0} needs finite bounds")]
    UnboundedInteger(usize),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}
