use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: need b > a and M >= 2 (got a={a}, b={b}, M={m})")]
    InvalidDomain { a: f64, b: f64, m: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("reference has zero norm")]
    ZeroReference,
    #[error("direct kernel is singular at eta = 0")]
    SingularKernel,
    #[error("field became non-finite")]
    NonfiniteField,
    #[error("gradient became non-finite")]
    NonfiniteGradient,
    #[error("library function `{name}` is not finite at x = {x}")]
    NonfiniteSample { name: String, x: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("expression error: {0}")]
    Expression(String),
    #[error("training diverged at epoch {epoch}: loss {loss:e} exceeds 1e6 x initial {initial:e}")]
    Divergence { epoch: usize, loss: f64, initial: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
