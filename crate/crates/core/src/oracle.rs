//! Tilted moments by quadrature.
//!
//! Everything is integrated in the offset `u = x - x0` from a reference point
//! `x0` (the saddlepoint when it exists), with weights
//! `w(u) = exp(K(x0 + u, t) - K(x0, t) + q(x0 + u))`. The exponent is formed
//! from a cancellation-free increment of `g`, so weights keep full relative
//! accuracy even where `t x` and `g(x)` are both huge.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::linear_grid;
use crate::model::{TailModel, TailShape};
use crate::quad::{self, Partition, Tolerance};
use crate::tilt::{saddlepoint, TiltPoint};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const KS_POINTS: usize = 201;
pub const KS_HALF_WIDTH: f64 = 5.0;

/// Log-weight below which the right tail is considered exhausted.
const TAIL_LOG_CUTOFF: f64 = -60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentSource {
    Oracle,
    Asymptotic,
}

/// Quadrature error estimates accompanying an oracle [`MomentSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentErrors {
    /// Absolute error of `log_phi`.
    pub log_phi: f64,
    pub m: f64,
    pub s2: f64,
    pub mu: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub t: f64,
    pub log_phi: f64,
    pub m: f64,
    pub s2: f64,
    /// Central moments `μ_j` for `j = 3..=j_max`.
    pub mu: BTreeMap<usize, f64>,
    pub source: MomentSource,
    /// `m - ψ(t)` resolved below the rounding of `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<MomentErrors>,
}

impl MomentSet {
    pub fn s(&self) -> f64 {
        self.s2.sqrt()
    }

    /// Central moment of order `j`, with `μ_0 = 1`, `μ_1 = 0`, `μ_2 = s²`.
    pub fn central(&self, j: usize) -> Option<f64> {
        match j {
            0 => Some(1.0),
            1 => Some(0.0),
            2 => Some(self.s2),
            j => self.mu.get(&j).copied(),
        }
    }
}

/// Reference point and integration layout for one tilt parameter.
struct Frame<'a> {
    model: &'a TailModel,
    t: f64,
    x0: f64,
    /// `x̂ - x0`, nonzero only below the resolution of `x0`.
    x_lo: f64,
    /// `K(x0, t)`
    k0: f64,
    /// `t - h(x0)` beyond working precision.
    slope: f64,
    intervals: Vec<(f64, f64)>,
}

impl<'a> Frame<'a> {
    fn new(model: &'a TailModel, t: f64) -> Result<Self> {
        let low = model.domain_low;
        let (x0, x_lo, scale) = match saddlepoint(model, t) {
            Ok(sp) => {
                let h1 = model.h_derivs(sp.hi)?[1];
                (sp.hi, sp.lo, 1.0 / h1.sqrt())
            }
            // K(·, t) decreases on the whole domain: its maximum sits at the
            // lower end and the weight decays at rate h(low) - t from there.
            Err(Error::BelowRange { .. }) => {
                let x0 = match model.g(low) {
                    Ok(_) => low,
                    Err(_) => low + 1e-12 * low.max(1.0),
                };
                let d = model.h_derivs(x0)?;
                let decay = 1.0 / (d[0] - t);
                let curve = if d[1] > 0.0 { 1.0 / d[1].sqrt() } else { f64::INFINITY };
                (x0, 0.0, decay.min(curve))
            }
            Err(e) => return Err(e),
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Precondition(format!(
                "degenerate tilted scale {scale} at t = {t}"
            )));
        }
        let k0 = t * x0 - model.g(x0)?;
        let mut frame = Frame {
            model,
            t,
            x0,
            x_lo,
            k0,
            slope: model.h_residual(x0, t)?,
            intervals: Vec::new(),
        };
        frame.layout(scale)?;
        Ok(frame)
    }

    fn log_weight(&self, u: f64) -> Result<f64> {
        let x = self.x0 + u;
        let inc = match self.model.g_increment(self.x0, u) {
            Ok(inc) => inc,
            Err(Error::Overflow { .. }) if u > 0.0 => return Ok(f64::NEG_INFINITY),
            Err(e) => return Err(e),
        };
        let dk = self.slope * u - inc.r;
        if dk == f64::NEG_INFINITY {
            return Ok(dk);
        }
        Ok(dk + self.model.q.eval(x)?)
    }

    fn weight(&self, u: f64) -> Result<f64> {
        Ok(self.log_weight(u)?.exp())
    }

    /// Core pieces of width `scale` over `±W scale`, a single left segment
    /// down to the domain edge, and doubling right panels until the weight
    /// is negligible.
    fn layout(&mut self, scale: f64) -> Result<()> {
        let w = (2.0 * self.t.ln()).max(10.0);
        let left_edge = self.model.domain_low - self.x0;
        let core_lo = (-w * scale).max(left_edge);
        if left_edge < core_lo {
            self.intervals.push((left_edge, core_lo));
        }
        let pieces = ((w * scale - core_lo) / scale).ceil().max(1.0) as usize;
        let step = (w * scale - core_lo) / pieces as f64;
        for i in 0..pieces {
            let a = core_lo + step * i as f64;
            let b = if i + 1 == pieces {
                w * scale
            } else {
                core_lo + step * (i + 1) as f64
            };
            self.intervals.push((a, b));
        }
        let peak = self.log_weight(0.0).unwrap_or(0.0);
        let mut a = w * scale;
        let mut width = w * scale;
        for _ in 0..200 {
            if self.log_weight(a)? - peak < TAIL_LOG_CUTOFF {
                return Ok(());
            }
            self.intervals.push((a, a + width));
            a += width;
            width *= 2.0;
        }
        Err(Error::Precondition(format!(
            "tilted weight at t = {} does not decay",
            self.t
        )))
    }

    fn partition(&self, n: usize, tol: f64) -> Result<Partition> {
        quad::adaptive(
            |u, out: &mut [f64]| {
                let w = self.weight(u)?;
                let mut p = w;
                for o in out.iter_mut() {
                    *o = p;
                    p *= u;
                }
                Ok(())
            },
            &self.intervals,
            n,
            Tolerance::relative(tol),
        )
    }
}

/// Tilted law at one `t`: an adapted partition with its normalization and mean.
pub struct TiltedLaw<'a> {
    frame: Frame<'a>,
    partition: Partition,
    mass: f64,
    mass_err: f64,
    /// Mean offset `E[u]`.
    delta: f64,
    delta_err: f64,
}

impl<'a> TiltedLaw<'a> {
    /// Adapts the partition for raw moments up to order `order`.
    pub fn new(model: &'a TailModel, t: f64, order: usize, tol: f64) -> Result<Self> {
        let frame = Frame::new(model, t)?;
        let partition = frame.partition(order.max(1) + 1, tol)?;
        let v = partition.values();
        let e = partition.errors();
        if !(v[0] > 0.0) {
            return Err(Error::Quadrature {
                value: v[0],
                abs_error: e[0],
                segments: partition.segments.len(),
            });
        }
        let delta = v[1] / v[0];
        let delta_err = (e[1] + delta.abs() * e[0]) / v[0];
        Ok(TiltedLaw {
            frame,
            mass: v[0],
            mass_err: e[0],
            delta,
            delta_err,
            partition,
        })
    }

    pub fn log_phi(&self) -> f64 {
        self.frame.k0 + self.mass.ln()
    }

    pub fn log_phi_error(&self) -> f64 {
        self.mass_err / self.mass
    }

    pub fn mean(&self) -> f64 {
        self.frame.x0 + self.delta
    }

    /// `m - ψ(t)`.
    pub fn mean_shift(&self) -> f64 {
        self.delta - self.frame.x_lo
    }

    /// Central moments `∫(u - δ)^j w / ∫w` for `j = 2..=j_max`, with error estimates.
    pub fn central_moments(&self, j_max: usize) -> Result<Vec<(f64, f64)>> {
        let delta = self.delta;
        let n = j_max.saturating_sub(1);
        if n == 0 {
            return Ok(Vec::new());
        }
        let p = self.partition.reintegrate(
            |u, out: &mut [f64]| {
                let w = self.frame.weight(u)?;
                let c = u - delta;
                let mut p = c * c * w;
                for o in out.iter_mut() {
                    *o = p;
                    p *= c;
                }
                Ok(())
            },
            n,
        )?;
        let (v, e) = (p.values(), p.errors());
        Ok((0..n)
            .map(|i| {
                let j = i + 2;
                let value = v[i] / self.mass;
                // Mean uncertainty enters through dμ_j/dδ = -j μ_{j-1}.
                let lower = if j >= 3 { v[i - 1] / self.mass } else { 0.0 };
                let err = e[i] / self.mass
                    + value.abs() * self.mass_err / self.mass
                    + j as f64 * lower.abs() * self.delta_err;
                (value, err)
            })
            .collect())
    }

    /// `∫(u - x_lo)^α w`, i.e. `Ψ(t, α) e^{-K(x0, t)}`.
    /// `Ψ(t, α) e^{-k0}` and its error bound, including the rounding of the
    /// cancellation between both sides of the reference point.
    pub fn psi_alpha(&self, alpha: u32) -> Result<(f64, f64)> {
        let lo = self.frame.x_lo;
        let p = self.partition.reintegrate(
            |u, out: &mut [f64]| {
                out[0] = (u - lo).powi(alpha as i32) * self.frame.weight(u)?;
                Ok(())
            },
            1,
        )?;
        Ok((p.values()[0], p.errors()[0] + 4.0 * f64::EPSILON * p.abs_values()[0]))
    }

    /// `P(X_t ≤ m + s y)` given the standard deviation `s`.
    pub fn cdf_at(&self, s: f64, y: f64) -> Result<f64> {
        let cut = self.delta + s * y;
        let mut below = 0.0;
        for seg in &self.partition.segments {
            if seg.b <= cut {
                below += seg.value[0];
            } else {
                if seg.a < cut {
                    let mut f = |u: f64, out: &mut [f64]| {
                        out[0] = self.frame.weight(u)?;
                        Ok(())
                    };
                    below += quad::gk21(&mut f, seg.a, cut, 1)?.value[0];
                }
                break;
            }
        }
        Ok((below / self.mass).clamp(0.0, 1.0))
    }

    pub fn frame_k0(&self) -> f64 {
        self.frame.k0
    }
}

pub fn log_phi(model: &TailModel, t: f64, tol: f64) -> Result<f64> {
    Ok(TiltedLaw::new(model, t, 0, tol)?.log_phi())
}

/// `Ψ(t, α) e^{-K(x̂, t)}` with `Ψ(t, α) = ∫(x - x̂)^α e^{tx} p(x) dx`.
pub fn psi_alpha_normalized(model: &TailModel, t: f64, alpha: u32, tol: f64) -> Result<f64> {
    Ok(psi_alpha_normalized_with_error(model, t, alpha, tol)?.0)
}

/// `Ψ(t, α) e^{-K̂}` with its absolute error bound.
pub fn psi_alpha_normalized_with_error(model: &TailModel, t: f64, alpha: u32, tol: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("Ψ(t, α) needs t > 0, got {t}")));
    }
    let law = TiltedLaw::new(model, t, alpha as usize, tol)?;
    let tp = crate::tilt::tilt_point(model, t)?;
    // The frame is centred at tp.x_hat, whose K may differ from tp.k_hat by rounding.
    let (v, e) = law.psi_alpha(alpha)?;
    let f = (law.frame_k0() - tp.k_hat).exp();
    Ok((v * f, e * f))
}

pub fn exact_moments(model: &TailModel, t: f64, j_max: usize, tol: f64) -> Result<MomentSet> {
    if j_max < 2 {
        return Err(Error::Precondition(format!("j_max must be at least 2, got {j_max}")));
    }
    let law = TiltedLaw::new(model, t, j_max, tol)?;
    moments_of(&law, t, j_max)
}

fn moments_of(law: &TiltedLaw<'_>, t: f64, j_max: usize) -> Result<MomentSet> {
    let central = law.central_moments(j_max)?;
    let (s2, s2_err) = central[0];
    let mut mu = BTreeMap::new();
    let mut mu_err = BTreeMap::new();
    for (i, &(v, e)) in central.iter().enumerate().skip(1) {
        mu.insert(i + 2, v);
        mu_err.insert(i + 2, e);
    }
    Ok(MomentSet {
        t,
        log_phi: law.log_phi(),
        m: law.mean(),
        s2,
        mu,
        source: MomentSource::Oracle,
        mean_shift: Some(law.mean_shift()),
        errors: Some(MomentErrors {
            log_phi: law.log_phi_error(),
            m: law.delta_err,
            s2: s2_err,
            mu: mu_err,
        }),
    })
}

/// `P((X_t - m(t))/s(t) ≤ y)`.
pub fn standardized_cdf(model: &TailModel, t: f64, y: f64) -> Result<f64> {
    if y == f64::INFINITY {
        return Ok(1.0);
    }
    if y == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let law = TiltedLaw::new(model, t, 2, DEFAULT_TOL)?;
    let s2 = law.central_moments(2)?[0].0;
    law.cdf_at(s2.sqrt(), y)
}

pub fn normal_cdf(y: f64) -> f64 {
    0.5 * erfc(-y / std::f64::consts::SQRT_2)
}

/// Largest gap between the standardized tilted CDF and `Φ_N` over `ys`.
pub fn ks_distance_on_grid(model: &TailModel, t: f64, ys: &[f64]) -> Result<f64> {
    if ys.is_empty() {
        return Err(Error::Precondition("KS distance needs at least one grid point".into()));
    }
    let law = TiltedLaw::new(model, t, 2, DEFAULT_TOL)?;
    let s = law.central_moments(2)?[0].0.sqrt();
    let mut worst = 0.0_f64;
    for &y in ys {
        worst = worst.max((law.cdf_at(s, y)? - normal_cdf(y)).abs());
    }
    Ok(worst)
}

/// KS distance over 201 points on `[-5, 5]`.
pub fn ks_distance_to_normal(model: &TailModel, t: f64) -> Result<f64> {
    ks_distance_on_grid(model, t, &linear_grid(-KS_HALF_WIDTH, KS_HALF_WIDTH, KS_POINTS))
}

/// Tilt point and oracle moments in one pass, sharing the inversion.
pub fn evaluate(model: &TailModel, t: f64, j_max: usize, tol: f64) -> Result<(Option<TiltPoint>, MomentSet)> {
    let tp = match crate::tilt::tilt_point(model, t) {
        Ok(tp) => Some(tp),
        Err(Error::BelowRange { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok((tp, exact_moments(model, t, j_max, tol)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_model;
    use crate::tilt::tilt_point;

    fn weibull(k: f64) -> TailModel {
        builtin_model("weibull", &[k]).unwrap()
    }

    fn expexp() -> TailModel {
        builtin_model("expexp", &[]).unwrap()
    }

    fn gauss() -> TailModel {
        TailModel::from_sources("x^2", "0", 0.0, "gauss").unwrap()
    }

    /// Plain trapezoid sum of `x^j e^{tx} p(x)` relative to `K̂`, naive arithmetic.
    fn trapezoid(model: &TailModel, t: f64, j: i32) -> f64 {
        let tp = tilt_point(model, t).unwrap();
        let b = tp.x_hat + 40.0 * tp.sigma_hat();
        let n = 1_000_000;
        let h = b / n as f64;
        let f = |x: f64| {
            if x <= 0.0 {
                return 0.0;
            }
            x.powi(j) * (t * x - model.g(x).unwrap() + model.q.eval(x).unwrap() - tp.k_hat).exp()
        };
        let mut s = 0.5 * (f(0.0) + f(b));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        s * h
    }

    #[test]
    fn normalized_builtins_have_unit_mass() {
        for m in [weibull(2.0), weibull(3.0), expexp()] {
            assert!(log_phi(&m, 0.0, 1e-12).unwrap().abs() < 1e-10, "{}", m.label);
        }
    }

    #[test]
    fn weibull_mean_at_zero() {
        let ms = exact_moments(&weibull(2.0), 0.0, 4, DEFAULT_TOL).unwrap();
        assert!((ms.m - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-11);
        // Var = 1 - π/4
        assert!((ms.s2 - (1.0 - std::f64::consts::PI / 4.0)).abs() < 1e-11);
    }

    #[test]
    fn log_phi_against_trapezoid() {
        let m = weibull(2.0);
        let t = 3.5;
        let brute = trapezoid(&m, t, 0).ln() + tilt_point(&m, t).unwrap().k_hat;
        let got = log_phi(&m, t, DEFAULT_TOL).unwrap();
        assert!((got - brute).abs() < 1e-10, "{got} {brute}");
        let mean = trapezoid(&m, t, 1) / trapezoid(&m, t, 0);
        let ms = exact_moments(&m, t, 4, DEFAULT_TOL).unwrap();
        assert!((ms.m - mean).abs() < 1e-10);
    }

    #[test]
    fn psi_zero_is_phi_over_exp_k() {
        for m in [weibull(2.0), expexp()] {
            let t = 50.0;
            let tp = tilt_point(&m, t).unwrap();
            let psi0 = psi_alpha_normalized(&m, t, 0, DEFAULT_TOL).unwrap();
            let lp = log_phi(&m, t, DEFAULT_TOL).unwrap();
            assert!((psi0 - (lp - tp.k_hat).exp()).abs() < 1e-12 * psi0);
        }
    }

    #[test]
    fn gaussian_tilt_variance_and_symmetry() {
        let m = gauss();
        let ms = exact_moments(&m, 60.0, 6, DEFAULT_TOL).unwrap();
        assert!((ms.s2 - 0.5).abs() < 1e-12);
        assert!((ms.m - 30.0).abs() < 1e-12);
        assert!(ms.mu[&3].abs() < 1e-13);
        assert!((ms.mu[&4] - 0.75).abs() < 1e-12);
        assert!((standardized_cdf(&m, 60.0, 0.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(ks_distance_to_normal(&m, 60.0).unwrap() < 1e-10);
    }

    #[test]
    fn odd_psi_vanishes_for_quadratic() {
        let m = gauss();
        let tp = tilt_point(&m, 40.0).unwrap();
        let p1 = psi_alpha_normalized(&m, 40.0, 1, DEFAULT_TOL).unwrap();
        assert!(p1.abs() < 1e-14 * tp.sigma_hat2 * (2.0 * std::f64::consts::PI).sqrt());
    }

    #[test]
    fn mu2_equals_s2_and_even_moments_positive() {
        let m = expexp();
        let law = TiltedLaw::new(&m, 100.0, 6, DEFAULT_TOL).unwrap();
        let c = law.central_moments(6).unwrap();
        let ms = exact_moments(&expexp(), 100.0, 6, DEFAULT_TOL).unwrap();
        assert_eq!(c[0].0, ms.s2);
        assert!(ms.mu[&4] > 0.0 && ms.mu[&6] > 0.0);
    }

    #[test]
    fn q_shift_covariance() {
        let m = weibull(3.0);
        let shifted = m.with_q_shift(5.0);
        for &t in &[0.0, 10.0, 1000.0] {
            let a = exact_moments(&m, t, 5, DEFAULT_TOL).unwrap();
            let b = exact_moments(&shifted, t, 5, DEFAULT_TOL).unwrap();
            assert!((b.log_phi - a.log_phi - 5.0).abs() < 1e-12);
            assert!((b.m - a.m).abs() <= 1e-12 * a.m.abs());
            assert!((b.s2 - a.s2).abs() <= 1e-12 * a.s2);
        }
    }

    #[test]
    fn cdf_limits() {
        let m = expexp();
        assert_eq!(standardized_cdf(&m, 10.0, f64::INFINITY).unwrap(), 1.0);
        assert!(standardized_cdf(&m, 10.0, 40.0).unwrap() > 1.0 - 1e-12);
        assert!(standardized_cdf(&m, 10.0, -40.0).unwrap() < 1e-12);
    }

    #[test]
    fn below_range_uses_boundary_frame() {
        // h(0+) = e^{-1}, so t = 0 has no saddlepoint for expexp.
        let ms = exact_moments(&expexp(), 0.0, 3, DEFAULT_TOL).unwrap();
        assert!(ms.log_phi.abs() < 1e-10);
        let direct = quad::integrate_to_infinity(
            |x: f64| Ok(x * (-(x - 1.0).exp()).exp()),
            0.0,
            1.0,
            Tolerance::relative(1e-13),
        )
        .unwrap()
        .value
            / 0.759_415_796_768_330_3;
        assert!((ms.m - direct).abs() < 1e-10);
    }

    #[test]
    fn empty_ks_grid_rejected() {
        assert!(matches!(
            ks_distance_on_grid(&expexp(), 10.0, &[]),
            Err(Error::Precondition(_))
        ));
        let one = ks_distance_on_grid(&expexp(), 10.0, &[0.0]).unwrap();
        assert!((0.0..0.5).contains(&one));
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn odd_psi_far_out_matches_high_precision() {
        // 40-digit quadrature of (x - x̂)^α e^{K(x) - K̂} · 1.5 for weibull(1.5) at t = 1e4
        let m = builtin_model("weibull", &[1.5]).unwrap();
        let want = [
            (0, 354.49077018083733738),
            (1, 0.017724538509121627292),
            (3, 787.75726707096454045),
        ];
        for (a, w) in want {
            let (v, e) = psi_alpha_normalized_with_error(&m, 1e4, a, DEFAULT_TOL).unwrap();
            assert!((v / w - 1.0).abs() < 1e-9, "alpha {a}: {v} vs {w}");
            assert!(e < 1e-8 * w.abs().max(1.0));
        }
    }
}
