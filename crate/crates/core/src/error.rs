use thiserror::Error;

/// Errors raised by model construction, evaluation and the numerical engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },

    #[error("domain violation in {op} at x = {x}")]
    Domain { op: &'static str, x: f64 },

    #[error("overflow in {op} at x = {x}")]
    Overflow { op: &'static str, x: f64 },

    #[error("unknown builtin model `{0}`")]
    UnknownBuiltin(String),

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("h is not monotone: h({x0}) = {h0} but h({x1}) = {h1}")]
    NonMonotone { x0: f64, h0: f64, x1: f64, h1: f64 },

    #[error("no saddlepoint bracket for t = {t} below x = {cap}")]
    BracketNotFound { t: f64, cap: f64 },

    #[error("t = {t} lies below the range of h on the domain (h = {h_low} at the lower end)")]
    BelowRange { t: f64, h_low: f64 },

    #[error("quadrature did not converge: estimate {value}, error {abs_error} after {segments} segments")]
    Quadrature {
        value: f64,
        abs_error: f64,
        segments: usize,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("cannot write {path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
