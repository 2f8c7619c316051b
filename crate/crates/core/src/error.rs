use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gamma function pole at {0}")]
    Pole(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot parse {kind} spec `{input}`: {reason}")]
    Parse { kind: &'static str, input: String, reason: String },

    #[error("no bracket for c(x) at x = {x}: root lies below the monotone regime of the slowly varying function")]
    NoBracket { x: f64 },

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    ToleranceNotMet { tol: f64, estimate: f64 },

    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),

    #[error("case mismatch: {0}")]
    CaseMismatch(String),

    #[error("path simulation exceeded {cap} steps")]
    IterationCap { cap: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}
