//! Closed-form saddlepoint equivalents of the tilted moments.
//!
//! Asymptotic sides carry the factor `e^{q(x̂)}` wherever a density mass
//! appears. It is 1 when `q` vanishes at infinity and makes the equivalents
//! exact in the limit for constant `q`, which normalized models need.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::model::TailModel;
use crate::oracle::{MomentSet, MomentSource};
use crate::quad::{integrate, Tolerance};
use crate::tilt::{tilt_point, L_of, TiltPoint};

/// Raw moment `M_i` of the standard normal: `(i-1)!!` for even `i`, 0 for odd.
pub fn gauss_moment(i: u32) -> f64 {
    if i % 2 == 1 {
        return 0.0;
    }
    (1..i).step_by(2).map(f64::from).product()
}

/// `(M_{j+3} - 3j M_{j-1}) / 6`, the odd-order coefficient of `μ₃ s^{j-3}`.
pub fn odd_coefficient(j: u32) -> f64 {
    (gauss_moment(j + 3) - 3.0 * f64::from(j) * gauss_moment(j - 1)) / 6.0
}

/// `ψ''(t) = -h''(x̂) σ̂⁶`.
pub fn psi_second(tp: &TiltPoint) -> f64 {
    -tp.h2 * tp.sigma_hat2.powi(3)
}

pub fn moments_at(tp: &TiltPoint, log_phi: f64, j_max: usize) -> MomentSet {
    let s2 = tp.sigma_hat2;
    let mu3 = psi_second(tp);
    let mut mu = BTreeMap::new();
    for j in 3..=j_max {
        let v = if j == 3 {
            mu3
        } else if j % 2 == 0 {
            gauss_moment(j as u32) * s2.powi(j as i32 / 2)
        } else {
            odd_coefficient(j as u32) * mu3 * s2.powi((j as i32 - 3) / 2)
        };
        mu.insert(j, v);
    }
    MomentSet {
        t: tp.t,
        log_phi,
        m: tp.x_hat,
        s2,
        mu,
        source: MomentSource::Asymptotic,
        mean_shift: None,
        errors: None,
    }
}

/// `m ≈ ψ(t)`, `s² ≈ ψ'(t)`, `μ₃ ≈ ψ''(t)`, and Gaussian-based higher orders.
pub fn approx_moments(model: &TailModel, t: f64, j_max: usize) -> Result<MomentSet> {
    let tp = tilt_point(model, t)?;
    Ok(moments_at(&tp, log_phi_at(model, &tp)?, j_max))
}

/// `K̂ + ½ log(2π σ̂²) + q(x̂)`.
pub fn approx_log_phi(model: &TailModel, t: f64) -> Result<f64> {
    let tp = tilt_point(model, t)?;
    log_phi_at(model, &tp)
}

pub fn log_phi_at(model: &TailModel, tp: &TiltPoint) -> Result<f64> {
    Ok(gaussian_log_phi(tp) + model.q.eval(tp.x_hat)?)
}

/// `K̂ + ½ log(2π σ̂²)`, the equivalent without the `q` factor.
pub fn gaussian_log_phi(tp: &TiltPoint) -> f64 {
    tp.k_hat + 0.5 * (2.0 * PI * tp.sigma_hat2).ln()
}

/// `x̂ - h''(x̂) σ̂⁴ / 2`.
pub fn refined_m(model: &TailModel, t: f64) -> Result<f64> {
    let tp = tilt_point(model, t)?;
    Ok(tp.x_hat + refined_shift(&tp))
}

/// The correction `-h''(x̂) σ̂⁴ / 2` alone.
pub fn refined_shift(tp: &TiltPoint) -> f64 {
    -0.5 * tp.h2 * tp.sigma_hat2 * tp.sigma_hat2
}

/// Half-width `L(t)^{1/3} / √2` of the truncated Gaussian window.
pub fn t1_half_width(t: f64) -> Result<f64> {
    Ok(L_of(t)?.cbrt() / SQRT_2)
}

/// `∫_{-B}^{B} y^k e^{-y²/2} dy`.
fn truncated_gauss(k: u32, b: f64) -> Result<f64> {
    if k % 2 == 1 {
        return Ok(0.0);
    }
    let half = integrate(
        |y: f64| Ok(y.powi(k as i32) * (-0.5 * y * y).exp()),
        0.0,
        b,
        Tolerance::relative(1e-13),
    )?;
    Ok(2.0 * half.value)
}

pub fn t1_at(tp: &TiltPoint, alpha: u32) -> Result<f64> {
    let b = t1_half_width(tp.t)?;
    let first = truncated_gauss(alpha, b)?;
    let second = truncated_gauss(alpha + 3, b)?;
    Ok(first - tp.h2 * tp.sigma_hat2 * tp.sigma_hat() / 6.0 * second)
}

/// `T₁(t, α)` with both Gaussian integrals truncated at `±L(t)^{1/3}/√2`.
#[allow(non_snake_case)]
pub fn T1(model: &TailModel, t: f64, alpha: u32) -> Result<f64> {
    if !(t > 1.0) {
        return Err(Error::Precondition(format!("T1 needs t > 1, got {t}")));
    }
    t1_at(&tilt_point(model, t)?, alpha)
}

/// `σ̂^{α+1} T₁(t, α) e^{q(x̂)}`, the equivalent of `Ψ(t, α) e^{-K̂}`.
pub fn approx_psi_alpha(model: &TailModel, t: f64, alpha: u32) -> Result<f64> {
    let tp = tilt_point(model, t)?;
    Ok(tp.sigma_hat().powi(alpha as i32 + 1) * t1_at(&tp, alpha)? * model.q.eval(tp.x_hat)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_model;
    use crate::oracle::{exact_moments, psi_alpha_normalized, DEFAULT_TOL};

    #[test]
    fn gauss_moments() {
        assert_eq!(gauss_moment(0), 1.0);
        assert_eq!(gauss_moment(4), 3.0);
        assert_eq!(gauss_moment(6), 15.0);
        assert_eq!(gauss_moment(5), 0.0);
        assert_eq!(gauss_moment(8), 105.0);
        for i in 2..=20 {
            assert_eq!(gauss_moment(i), f64::from(i - 1) * gauss_moment(i - 2));
        }
    }

    #[test]
    fn odd_coefficients() {
        assert_eq!(odd_coefficient(5), 10.0);
        assert_eq!(odd_coefficient(7), 105.0);
        // j = 3 would give (15 - 9)/6 = 1, consistent with μ₃ itself
        assert_eq!(odd_coefficient(3), 1.0);
    }

    #[test]
    fn expexp_closed_forms() {
        let m = builtin_model("expexp", &[]).unwrap();
        let t = 50.0;
        let a = approx_moments(&m, t, 6).unwrap();
        assert!((a.m - (t.ln() + 1.0)).abs() < 1e-13);
        assert!((a.s2 - 1.0 / t).abs() < 1e-17);
        assert!((a.mu[&3] + 1.0 / (t * t)).abs() < 1e-18);
        assert!((a.mu[&4] - 3.0 * a.s2 * a.s2).abs() < 1e-18);
        assert!((a.mu[&5] - 10.0 * a.mu[&3] * a.s2).abs() < 1e-20);
        let tp = tilt_point(&m, t).unwrap();
        let want = t * t.ln() + 0.5 * (2.0 * PI / t).ln();
        assert!((gaussian_log_phi(&tp) - want).abs() < 1e-12);
        assert!((refined_m(&m, t).unwrap() - (t.ln() + 1.0 - 0.5 / t)).abs() < 1e-13);
    }

    #[test]
    fn weibull_log_phi_example() {
        let m = builtin_model("weibull", &[2.0]).unwrap();
        let tp = tilt_point(&m, 3.5).unwrap();
        let want = 3.0 + 2f64.ln() + 0.5 * (2.0 * PI / 2.25).ln();
        assert!((gaussian_log_phi(&tp) - want).abs() < 1e-13);
        assert!((approx_log_phi(&m, 3.5).unwrap() - want - 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn quadratic_has_no_corrections() {
        let m = crate::model::TailModel::from_sources("x^2", "0", 0.0, "gauss").unwrap();
        let tp = tilt_point(&m, 40.0).unwrap();
        assert_eq!(refined_m(&m, 40.0).unwrap(), tp.x_hat);
        let b = t1_half_width(40.0).unwrap();
        let want = 3.0 * (2.0 * PI).sqrt() * statrs::function::erf::erf(b / SQRT_2)
            - 2.0 * b * b * b * (-0.5 * b * b).exp()
            - 6.0 * b * (-0.5 * b * b).exp();
        assert!(
            (T1(&m, 40.0, 4).unwrap() - want).abs() < 1e-10,
            "{}",
            T1(&m, 40.0, 4).unwrap()
        );
        assert_eq!(T1(&m, 40.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn t1_limits() {
        let m = builtin_model("expexp", &[]).unwrap();
        let t = 1e12;
        assert!((T1(&m, t, 0).unwrap() - (2.0 * PI).sqrt()).abs() < 1e-9);
        let tp = tilt_point(&m, t).unwrap();
        let want = -tp.h2 * tp.sigma_hat2 * tp.sigma_hat() / 2.0 * (2.0 * PI).sqrt();
        assert!((T1(&m, t, 1).unwrap() / want - 1.0).abs() < 1e-9);
    }

    #[test]
    fn s2_times_h_prime_is_one() {
        let m = builtin_model("weibull", &[3.0]).unwrap();
        for &t in &[10.0, 1e3, 1e5] {
            let a = approx_moments(&m, t, 4).unwrap();
            let h1 = crate::model::TailShape::h_derivs(&m, a.m).unwrap()[1];
            assert!((a.s2 * h1 - 1.0).abs() <= 2.0 * f64::EPSILON);
        }
    }

    #[test]
    fn refined_mean_beats_saddlepoint() {
        let m = builtin_model("weibull", &[3.0]).unwrap();
        for &t in &[100.0, 1000.0, 1e4] {
            let ex = exact_moments(&m, t, 2, DEFAULT_TOL).unwrap();
            let shift = ex.mean_shift.unwrap();
            let tp = tilt_point(&m, t).unwrap();
            assert!((shift - refined_shift(&tp)).abs() < 0.1 * shift.abs());
        }
    }

    #[test]
    fn lemma_psi_ratio_near_one() {
        let m = builtin_model("weibull", &[2.0]).unwrap();
        for alpha in 0..=4 {
            let exact = psi_alpha_normalized(&m, 1e4, alpha, DEFAULT_TOL).unwrap();
            let approx = approx_psi_alpha(&m, 1e4, alpha).unwrap();
            assert!((exact / approx - 1.0).abs() < 0.05, "{alpha} {exact} {approx}");
        }
    }
}
