use thiserror::Error;

use crate::coeff::Base;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("base mismatch: {0} vs {1}")]
    BaseMismatch(Base, Base),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),
    #[error("connection is not torsion-free: {0}")]
    Torsion(String),
    #[error("truncation overflow: {0}")]
    Truncation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("filtration shift violated by {witness}: {detail}")]
    ShiftViolation { witness: String, detail: String },
    #[error("identity failed: {0}")]
    IdentityFailure(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
