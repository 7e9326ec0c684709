use thiserror::Error;

/// Errors raised by the lattice algebra, condition evaluators and simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("axis {axis} out of range for dimension {dimension}")]
    AxisOutOfRange { axis: usize, dimension: usize },

    #[error("invalid generator rule: {0}")]
    InvalidRule(String),

    #[error("field is not adapted: {0}")]
    NotAdapted(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sample lattice does not cover the region required by the field support")]
    InsufficientMargin,

    #[error("resource budget exceeded: {requested} values requested, budget is {budget}")]
    ResourceBudget { requested: u128, budget: u128 },

    #[error("cutoff {cutoff} cannot be materialized: {reason}")]
    CutoffTooLarge { cutoff: u64, reason: &'static str },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
