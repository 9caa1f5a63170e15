//! Exact and asymptotic moments of exponentially tilted light-tailed densities.
//!
//! A density `p(x) = exp(-(g(x) - q(x)))` is tilted by `e^{tx}`. The crate
//! computes the tilted moments by quadrature, their saddlepoint equivalents,
//! and grid evidence for the regularity hypotheses under which the two agree
//! as `t → ∞`.

// `!(x > 0.0)` is the idiom that also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod karamata;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod tilt;

pub use error::{Error, Result};
pub use model::{builtin_model, parse_expression, validate_model, Expr, Jet4, TailModel, TailShape};
