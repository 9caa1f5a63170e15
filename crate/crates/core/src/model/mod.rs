//! Tail density models `p(x) = exp(-(g(x) - q(x)))` on `[domain_low, ∞)`.

mod dd;
mod expr;
mod jet;
mod parse;

use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub(crate) use dd::Dd;
pub use expr::Expr;
pub(crate) use expr::Increment;
pub use jet::Jet4;
pub use parse::parse_expression;

use crate::error::{Error, Result};
use crate::grid::log_grid;
use crate::quad::{self, Tolerance};

/// Evaluates `h = g'` and its derivatives. Everything in the variation
/// analysis and the saddlepoint inversion only needs this view of a model.
pub trait TailShape: Sync {
    /// `[h, h', h'', h''']` at `x`.
    fn h_derivs(&self, x: f64) -> Result<[f64; 4]>;

    fn h(&self, x: f64) -> Result<f64> {
        Ok(self.h_derivs(x)?[0])
    }

    fn q(&self, x: f64) -> Result<f64>;

    fn domain_low(&self) -> f64;

    /// `t - h(x)`. Implementations may evaluate it beyond working precision.
    fn h_residual(&self, x: f64, t: f64) -> Result<f64> {
        Ok(t - self.h(x)?)
    }

    /// True when `q` is known to be constant.
    fn q_is_constant(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    #[serde(serialize_with = "ser_expr", deserialize_with = "de_expr")]
    pub g: Expr,
    #[serde(serialize_with = "ser_expr", deserialize_with = "de_expr")]
    pub q: Expr,
    pub domain_low: f64,
    pub is_normalized: bool,
    pub label: String,
}

fn ser_expr<S: Serializer>(e: &Expr, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

fn de_expr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Expr, D::Error> {
    let s = String::deserialize(d)?;
    parse_expression(&s).map_err(serde::de::Error::custom)
}

impl TailModel {
    pub fn new(g: Expr, q: Expr, domain_low: f64, label: impl Into<String>) -> Result<Self> {
        if !(domain_low >= 0.0 && domain_low.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "domain_low must be finite and >= 0, got {domain_low}"
            )));
        }
        Ok(TailModel {
            g,
            q,
            domain_low,
            is_normalized: false,
            label: label.into(),
        })
    }

    /// Model from expression sources for `g` and `q`.
    pub fn from_sources(g: &str, q: &str, domain_low: f64, label: impl Into<String>) -> Result<Self> {
        TailModel::new(parse_expression(g)?, parse_expression(q)?, domain_low, label)
    }

    pub fn g(&self, x: f64) -> Result<f64> {
        self.g.eval(x)
    }

    pub fn g_jet(&self, x: f64) -> Result<Jet4> {
        self.g.eval_jet(x)
    }

    pub fn log_density(&self, x: f64) -> Result<f64> {
        Ok(self.q.eval(x)? - self.g.eval(x)?)
    }

    /// A copy with `c` added to `q`.
    pub fn with_q_shift(&self, c: f64) -> TailModel {
        TailModel {
            q: self.q.clone() + Expr::constant(c),
            is_normalized: false,
            label: format!("{} + q-shift {c}", self.label),
            ..self.clone()
        }
    }

    pub(crate) fn g_increment(&self, x0: f64, u: f64) -> Result<Increment> {
        self.g.increment(x0, u)
    }
}

impl TailShape for TailModel {
    fn h_derivs(&self, x: f64) -> Result<[f64; 4]> {
        let d = self.g.eval_jet(x)?.derivatives();
        Ok([d[1], d[2], d[3], d[4]])
    }

    fn q(&self, x: f64) -> Result<f64> {
        self.q.eval(x)
    }

    fn domain_low(&self) -> f64 {
        self.domain_low
    }

    fn h_residual(&self, x: f64, t: f64) -> Result<f64> {
        let (_, slope) = self.g.slope_dd(x)?;
        Ok((Dd::new(t) - slope).to_f64())
    }

    fn q_is_constant(&self) -> bool {
        self.q.is_constant()
    }
}

/// Builtin models: `weibull` with shape `k > 1`, and `expexp`.
pub fn builtin_model(name: &str, params: &[f64]) -> Result<TailModel> {
    match name {
        "weibull" => {
            let k = match params {
                [k] => *k,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "weibull takes one shape parameter, got {}",
                        params.len()
                    )))
                }
            };
            if !(k > 1.0 && k.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "weibull shape must satisfy k > 1, got {k}"
                )));
            }
            let g = Expr::var().pow(k) - Expr::constant(k - 1.0) * Expr::var().ln();
            Ok(TailModel {
                g,
                q: Expr::constant(k.ln()),
                domain_low: 0.0,
                is_normalized: true,
                label: format!("weibull({k})"),
            })
        }
        "expexp" => {
            if !params.is_empty() {
                return Err(Error::InvalidParameter("expexp takes no parameters".into()));
            }
            Ok(TailModel {
                g: (Expr::var() - Expr::constant(1.0)).exp(),
                q: Expr::constant(expexp_log_normalizer()?),
                domain_low: 0.0,
                is_normalized: true,
                label: "expexp".into(),
            })
        }
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

/// `log c` with `c^{-1} = ∫_0^∞ exp(-e^{x-1}) dx`, computed once.
fn expexp_log_normalizer() -> Result<f64> {
    static CELL: OnceLock<std::result::Result<f64, Error>> = OnceLock::new();
    CELL.get_or_init(|| {
        let r = quad::integrate_to_infinity(
            |x: f64| Ok((-(x - 1.0).exp()).exp()),
            0.0,
            1.0,
            Tolerance::relative(1e-13),
        )?;
        Ok(-r.value.ln())
    })
    .clone()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    /// Grid point witnessing a failure.
    pub witness: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    /// Largest grid point at which `g` could be evaluated without overflow.
    pub grid_top: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const VALIDATION_POINTS: usize = 256;
pub const VALIDATION_TOP: f64 = 1e6;

fn check(name: &str, failure: Option<(f64, String)>, ok_detail: String) -> ValidationCheck {
    match failure {
        None => ValidationCheck {
            name: name.into(),
            passed: true,
            witness: None,
            detail: ok_detail,
        },
        Some((x, detail)) => ValidationCheck {
            name: name.into(),
            passed: false,
            witness: Some(x),
            detail,
        },
    }
}

/// Grid verdicts for the standing hypotheses on `g` and `q`: evaluability,
/// positivity and convexity of `g`, superlinear growth of `g`, and
/// boundedness of `q`. These are heuristics on a finite grid.
pub fn validate_model(m: &TailModel) -> ValidationReport {
    let start = m.domain_low.max(1e-3) * 1.001;
    let grid = log_grid(start, VALIDATION_TOP, VALIDATION_POINTS);

    let mut xs = Vec::with_capacity(grid.len());
    let mut g = Vec::new();
    let mut h = Vec::new();
    let mut q = Vec::new();
    let mut eval_failure = None;
    for &x in &grid {
        let r = m.g_jet(x).and_then(|j| Ok((j, m.q.eval(x)?)));
        match r {
            Ok((j, qv)) => {
                xs.push(x);
                g.push(j.value());
                h.push(j.derivative(1));
                q.push(qv);
            }
            // Overflow far out only truncates the grid; g has left the f64 range.
            Err(Error::Overflow { .. }) if xs.len() >= VALIDATION_POINTS / 2 => break,
            Err(e) => {
                eval_failure = Some((x, e.to_string()));
                break;
            }
        }
    }
    let grid_top = xs.last().copied().unwrap_or(start);
    let mut checks = vec![check(
        "evaluable",
        eval_failure.clone(),
        format!("g, g', q finite on [{start}, {grid_top}]"),
    )];
    if eval_failure.is_some() {
        return ValidationReport { checks, grid_top };
    }
    let n = xs.len();

    let positive = xs.iter().zip(&g).find(|(_, gv)| **gv <= 0.0);
    checks.push(check(
        "g positive",
        positive.map(|(x, gv)| (*x, format!("g({x}) = {gv}"))),
        "g > 0 on grid".into(),
    ));

    let convex = (1..n).find(|&i| h[i] < h[i - 1] - 1e-12 * h[i - 1].abs());
    checks.push(check(
        "g convex",
        convex.map(|i| {
            (
                xs[i],
                format!("h({}) = {} < h({}) = {}", xs[i], h[i], xs[i - 1], h[i - 1]),
            )
        }),
        "h = g' nondecreasing on grid".into(),
    ));

    let ratio: Vec<f64> = xs.iter().zip(&g).map(|(x, gv)| gv / x).collect();
    let mid = n / 2;
    // Growth is judged on the last quarter, which stays above x = 1 even
    // when overflow truncates the grid.
    let top = 3 * n / 4;
    let stalls = (top + 1..n).find(|&i| ratio[i] <= ratio[i - 1]);
    let growth_failure = match stalls {
        Some(i) => Some((
            xs[i],
            format!("g(x)/x stops increasing: {} -> {}", ratio[i - 1], ratio[i]),
        )),
        None if ratio[n - 1] < 2.0 * ratio[top].abs() => Some((
            xs[n - 1],
            format!("g(x)/x grows only from {} to {}", ratio[top], ratio[n - 1]),
        )),
        None => None,
    };
    checks.push(check(
        "g(x)/x unbounded",
        growth_failure,
        format!("g(x)/x increases from {} to {}", ratio[top], ratio[n - 1]),
    ));

    let lower = q[..mid].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let upper_idx = (mid..n)
        .max_by(|&a, &b| q[a].abs().total_cmp(&q[b].abs()))
        .unwrap_or(mid);
    let upper = q[upper_idx].abs();
    let bounded_failure = if upper > 2.0 * lower + 1.0 {
        Some((xs[upper_idx], format!("|q| grows to {upper} (lower-half sup {lower})")))
    } else {
        None
    };
    checks.push(check(
        "q bounded",
        bounded_failure,
        format!("sup |q| = {}", lower.max(upper)),
    ));

    ValidationReport { checks, grid_top }
}
