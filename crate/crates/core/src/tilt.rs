//! Saddlepoint quantities for a tilt parameter `t`.
//!
//! `x̂ = ψ(t)` solves `h(x̂) = t`, `σ̂² = 1/h'(x̂)` and `K(x, t) = t x - g(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TailModel, TailShape};

pub const INVERSION_RTOL: f64 = 1e-12;
pub const INVERSION_ATOL: f64 = 1e-12;
pub const X_MAX_CAP: f64 = 1e12;
const START_OFFSET: f64 = 1e-6;

/// `ψ(t)` as an unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saddlepoint {
    pub hi: f64,
    pub lo: f64,
}

/// `h(x)`, with overflow mapped to `+∞` so that it still brackets.
fn h_or_inf<S: TailShape + ?Sized>(m: &S, x: f64) -> Result<f64> {
    match m.h(x) {
        Err(Error::Overflow { .. }) => Ok(f64::INFINITY),
        r => r,
    }
}

fn bracket<S: TailShape + ?Sized>(m: &S, t: f64) -> Result<(f64, f64)> {
    let low = m.domain_low();
    let mut x = (low + START_OFFSET).max(1.0);
    let mut hx = h_or_inf(m, x)?;
    if hx < t {
        loop {
            let next = 2.0 * x;
            if next > X_MAX_CAP {
                return Err(Error::BracketNotFound { t, cap: X_MAX_CAP });
            }
            let hn = h_or_inf(m, next)?;
            if hn < hx {
                return Err(Error::NonMonotone {
                    x0: x,
                    h0: hx,
                    x1: next,
                    h1: hn,
                });
            }
            if hn >= t {
                return Ok((x, next));
            }
            x = next;
            hx = hn;
        }
    }
    for _ in 0..1100 {
        let next = low + 0.5 * (x - low);
        if !(next > low && next < x) {
            break;
        }
        let hn = m.h(next)?;
        if hn > hx {
            return Err(Error::NonMonotone {
                x0: next,
                h0: hn,
                x1: x,
                h1: hx,
            });
        }
        if hn < t {
            return Ok((next, x));
        }
        x = next;
        hx = hn;
    }
    Err(Error::BelowRange { t, h_low: hx })
}

/// Solves `h(x) = t` to a double-double saddlepoint.
pub fn saddlepoint<S: TailShape + ?Sized>(m: &S, t: f64) -> Result<Saddlepoint> {
    if !t.is_finite() {
        return Err(Error::Precondition(format!("tilt parameter must be finite, got {t}")));
    }
    let (mut a, mut b) = bracket(m, t)?;
    while b - a > 1e-3 * b.abs() {
        let mid = 0.5 * (a + b);
        if h_or_inf(m, mid)? < t {
            a = mid;
        } else {
            b = mid;
        }
    }
    // Newton on the residual, kept inside the bracket; the double-double
    // residual is needed only once the step is down to the last digits.
    let mut x = 0.5 * (a + b);
    let mut precise = false;
    for _ in 0..60 {
        let d = m.h_derivs(x)?;
        let r = if precise { m.h_residual(x, t)? } else { t - d[0] };
        let dh = d[1];
        if r > 0.0 {
            a = a.max(x);
        } else if r < 0.0 {
            b = b.min(x);
        }
        let mut next = x + r / dh;
        if !(next > a && next < b) || !dh.is_finite() || dh <= 0.0 {
            next = 0.5 * (a + b);
        }
        let step = next - x;
        x = next;
        if step.abs() <= 1e-6 * x.abs() {
            if precise && step.abs() <= 2.0 * f64::EPSILON * x.abs() {
                break;
            }
            precise = true;
        }
        if a == b {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..3 {
        let r = m.h_residual(x, t)?;
        let dh = m.h_derivs(x)?[1];
        lo = r / dh;
        let moved = x + lo;
        if moved == x || !lo.is_finite() {
            break;
        }
        x = moved;
    }
    if !lo.is_finite() {
        lo = 0.0;
    }
    let r = m.h_residual(x, t)?;
    if r.abs() > INVERSION_ATOL + INVERSION_RTOL * t.abs() {
        return Err(Error::Precondition(format!(
            "inversion of h at t = {t} stalled at x = {x} with residual {r}"
        )));
    }
    Ok(Saddlepoint { hi: x, lo })
}

/// `ψ(t) = h⁻¹(t)`.
pub fn invert_h<S: TailShape + ?Sized>(m: &S, t: f64) -> Result<f64> {
    saddlepoint(m, t).map(|s| s.hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltPoint {
    pub t: f64,
    pub x_hat: f64,
    /// Low part of the saddlepoint below the resolution of `x_hat`.
    pub x_hat_lo: f64,
    pub sigma_hat2: f64,
    #[serde(rename = "K_hat")]
    pub k_hat: f64,
    /// `h''(x̂)`
    pub h2: f64,
    /// `h'''(x̂)`
    pub h3: f64,
}

impl TiltPoint {
    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat2.sqrt()
    }
}

pub fn tilt_point(m: &TailModel, t: f64) -> Result<TiltPoint> {
    let sp = saddlepoint(m, t)?;
    let jet = m.g_jet(sp.hi)?;
    let h1 = jet.derivative(2);
    if !(h1 > 0.0) {
        return Err(Error::Precondition(format!(
            "h'(x̂) = {h1} at x̂ = {} is not positive",
            sp.hi
        )));
    }
    Ok(TiltPoint {
        t,
        x_hat: sp.hi,
        x_hat_lo: sp.lo,
        sigma_hat2: 1.0 / h1,
        k_hat: t * sp.hi - jet.value(),
        h2: jet.derivative(3),
        h3: jet.derivative(4),
    })
}

/// `K(x̂ + u, t) - K(x̂, t)` without cancellation, `x̂` taken as `tp.x_hat`.
pub fn k_increment(m: &TailModel, tp: &TiltPoint, u: f64) -> Result<f64> {
    let inc = m.g_increment(tp.x_hat, u)?;
    Ok(m.h_residual(tp.x_hat, tp.t)? * u - inc.r)
}

/// Third-order Taylor term of `K` at `x̂` and the remainder beyond it.
#[allow(non_snake_case)]
pub fn K_remainder(m: &TailModel, tp: &TiltPoint, x: f64) -> Result<(f64, f64)> {
    let u = x - tp.x_hat;
    let cubic = -tp.h2 * u * u * u / 6.0;
    let dk = k_increment(m, tp, u)?;
    let quad = -u * u / (2.0 * tp.sigma_hat2);
    Ok((cubic, dk - (quad + cubic)))
}

/// `L(t) = (ln t)³`.
#[allow(non_snake_case)]
pub fn L_of(t: f64) -> Result<f64> {
    if !(t > 1.0) {
        return Err(Error::Precondition(format!("L(t) needs t > 1, got {t}")));
    }
    Ok(t.ln().powi(3))
}

/// `∫₁ᵗ ψ(u) du = K(x̂, t) - ψ(1) + g(ψ(1))`.
pub fn integral_psi(m: &TailModel, t: f64) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(Error::Precondition(format!(
            "integral of ψ from 1 needs t >= 1, got {t}"
        )));
    }
    let tp = tilt_point(m, t)?;
    let x1 = invert_h(m, 1.0)?;
    Ok(tp.k_hat - x1 + m.g(x1)?)
}
