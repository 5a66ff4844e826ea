use thiserror::Error;

/// Errors raised by model construction, LMI assembly and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: String,
        expected: String,
        found: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("algebraic loop: {0} must be zero for simulation")]
    AlgebraicLoop(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(context: impl Into<String>, expected: impl ToString, found: impl ToString) -> Error {
    Error::Shape {
        context: context.into(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
