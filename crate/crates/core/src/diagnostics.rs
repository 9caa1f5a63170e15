//! Exact-against-asymptotic comparisons over `t` grids, the Gaussian
//! convergence suite, and the assembled report.
//!
//! Rows are computed in parallel and collected in grid order, so a report is a
//! pure function of the model and the configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{approx_psi_alpha, log_phi_at, moments_at};
use crate::error::{Error, Result};
use crate::grid::{linear_grid, log_grid};
use crate::karamata::{
    check_corollaries, check_lemma_2_3, check_luc, classify, corollary_grid, TrendRecord, TrendSettings, TrendVerdict,
    VariationClass, VariationKind,
};
use crate::model::{validate_model, TailModel, TailShape, ValidationReport};
use crate::oracle::{
    exact_moments, ks_distance_to_normal, log_phi, psi_alpha_normalized_with_error, MomentSet, DEFAULT_TOL,
};
use crate::tilt::{integral_psi, invert_h, tilt_point, L_of, TiltPoint};

/// Asymptotic values below this multiple of their natural scale are not divided by.
pub const NEAR_ZERO: f64 = 1e-12;
/// Highest central moment order a configuration may request.
pub const J_MAX_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassThresholds {
    /// Final `|ratio - 1|` allowed for `Φ`, `m` and `s²`.
    pub low_order: f64,
    /// Final `|ratio - 1|` allowed for `μ₃` and higher.
    pub high_order: f64,
    /// Final `|ratio - 1|` allowed for the `Ψ(t, α)` series.
    pub lemma: f64,
    /// Allowed rise of the KS distance from one grid point to the next.
    pub ks_noise: f64,
    /// Bound on the mgf deviation at the largest `t`.
    pub mgf_max_dev: f64,
}

impl Default for PassThresholds {
    fn default() -> Self {
        PassThresholds {
            low_order: 0.02,
            high_order: 0.10,
            lemma: 0.05,
            ks_noise: 1e-3,
            mgf_max_dev: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub t_grid: Vec<f64>,
    pub j_max: usize,
    /// Relative tolerance of every oracle quadrature.
    pub quadrature_tol: f64,
    pub thresholds: PassThresholds,
    pub trend: TrendSettings,
    pub lambda_grid: Vec<f64>,
    /// Orders `α` of the `Ψ(t, α)` series.
    pub psi_alphas: Vec<u32>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            t_grid: log_grid(10.0, 1e4, 7),
            j_max: 6,
            quadrature_tol: DEFAULT_TOL,
            thresholds: PassThresholds::default(),
            trend: TrendSettings::default(),
            lambda_grid: default_lambda_grid(),
            psi_alphas: (0..=4).collect(),
        }
    }
}

/// Nine points on `[-2, 2]`.
pub fn default_lambda_grid() -> Vec<f64> {
    linear_grid(-2.0, 2.0, 9)
}

impl DiagnosticsConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Precondition(msg));
        if self.t_grid.is_empty() {
            return bad("the t grid is empty".into());
        }
        if self.t_grid.iter().any(|&t| !(t > 1.0 && t.is_finite())) {
            return bad("every t in the grid must be finite and exceed 1, since L(t) = (log t)^3 is used".into());
        }
        if self.t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("the t grid must be strictly increasing".into());
        }
        if !(2..=J_MAX_LIMIT).contains(&self.j_max) {
            return bad(format!("j_max must lie in 2..={J_MAX_LIMIT}, got {}", self.j_max));
        }
        if !(self.quadrature_tol > 0.0 && self.quadrature_tol < 1e-2) {
            return bad(format!(
                "quadrature_tol must lie in (0, 1e-2), got {}",
                self.quadrature_tol
            ));
        }
        let th = &self.thresholds;
        for (name, v) in [
            ("low_order", th.low_order),
            ("high_order", th.high_order),
            ("lemma", th.lemma),
            ("ks_noise", th.ks_noise),
            ("mgf_max_dev", th.mgf_max_dev),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!(
                    "threshold {name} must be a finite non-negative number, got {v}"
                ));
            }
        }
        if self.lambda_grid.iter().any(|l| !l.is_finite()) {
            return bad("the lambda grid must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowFlag {
    NearZeroDenominator,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub t: f64,
    pub exact: Option<f64>,
    pub asymptotic: Option<f64>,
    pub ratio: Option<f64>,
    /// Error bound on `ratio` propagated from the oracle.
    pub ratio_error: Option<f64>,
    pub flag: Option<RowFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RatioRow {
    fn failed(t: f64, e: &Error) -> Self {
        RatioRow {
            t,
            exact: None,
            asymptotic: None,
            ratio: None,
            ratio_error: None,
            flag: Some(RowFlag::Failed),
            note: Some(e.to_string()),
        }
    }

    /// `exact / asymptotic` unless `|asymptotic| ≤ NEAR_ZERO · scale`.
    fn divide(t: f64, exact: f64, asymptotic: f64, exact_error: f64, scale: f64) -> Self {
        if !(asymptotic.abs() > NEAR_ZERO * scale.abs()) {
            return RatioRow {
                t,
                exact: Some(exact),
                asymptotic: Some(asymptotic),
                ratio: None,
                ratio_error: None,
                flag: Some(RowFlag::NearZeroDenominator),
                note: None,
            };
        }
        RatioRow {
            t,
            exact: Some(exact),
            asymptotic: Some(asymptotic),
            ratio: Some(exact / asymptotic),
            ratio_error: Some(exact_error / asymptotic.abs()),
            flag: None,
            note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    /// File stem of the CSV export.
    pub key: String,
    pub quantity: String,
    pub rows: Vec<RatioRow>,
    pub pass_threshold: f64,
    /// `None` when fewer than two rows carry a ratio.
    pub converged: Option<bool>,
    /// `|ratio - 1|` at the largest `t`.
    pub final_abs_dev: Option<f64>,
}

impl RatioSeries {
    /// Over the top half of the grid `|ratio - 1|` may rise by at most ten
    /// times the row's error bound plus `1e-12`, and ends below the threshold.
    pub fn new(key: impl Into<String>, quantity: impl Into<String>, rows: Vec<RatioRow>, pass_threshold: f64) -> Self {
        let n = rows.len();
        let computed = rows.iter().filter(|r| r.ratio.is_some()).count();
        let final_abs_dev = rows.last().and_then(|r| r.ratio).map(|r| (r - 1.0).abs());
        let converged = if computed < 2 {
            None
        } else {
            let top = &rows[n / 2..];
            if top.iter().any(|r| r.ratio.is_none()) {
                Some(false)
            } else {
                let monotone = top.windows(2).all(|w| {
                    let d0 = (w[0].ratio.unwrap() - 1.0).abs();
                    let d1 = (w[1].ratio.unwrap() - 1.0).abs();
                    let margin = 10.0 * w[1].ratio_error.unwrap_or(0.0).max(w[0].ratio_error.unwrap_or(0.0)) + 1e-12;
                    d1 <= d0 + margin
                });
                Some(monotone && final_abs_dev.is_some_and(|d| d < pass_threshold))
            }
        };
        RatioSeries {
            key: key.into(),
            quantity: quantity.into(),
            rows,
            pass_threshold,
            converged,
            final_abs_dev,
        }
    }

    /// True when every row was skipped for a vanishing asymptotic side.
    pub fn degenerate(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.flag == Some(RowFlag::NearZeroDenominator))
    }
}

struct Pair {
    exact: MomentSet,
    approx: MomentSet,
    tp: TiltPoint,
}

fn pair_at(model: &TailModel, t: f64, j_max: usize, tol: f64) -> Result<Pair> {
    let tp = tilt_point(model, t)?;
    let approx = moments_at(&tp, log_phi_at(model, &tp)?, j_max);
    let exact = exact_moments(model, t, j_max, tol)?;
    Ok(Pair { exact, approx, tp })
}

/// Series for `Φ`, `m`, `s²` and `μ₃ … μ_{j_max}`, in that order.
pub fn ratio_suite(model: &TailModel, ts: &[f64], j_max: usize, tol: f64, th: &PassThresholds) -> Vec<RatioSeries> {
    let pairs: Vec<Result<Pair>> = ts.par_iter().map(|&t| pair_at(model, t, j_max, tol)).collect();
    let build = |f: &dyn Fn(&Pair) -> RatioRow| -> Vec<RatioRow> {
        ts.iter()
            .zip(&pairs)
            .map(|(&t, p)| match p {
                Ok(p) => f(p),
                Err(e) => RatioRow::failed(t, e),
            })
            .collect()
    };
    let mut out = Vec::with_capacity(j_max + 1);
    out.push(RatioSeries::new(
        "phi",
        "Phi (rows hold log Phi; ratio is exp of the difference)",
        build(&|p| {
            // both sides carry the rounding of K̂, which dominates when |log Φ| is large
            let err = p.exact.errors.as_ref().map_or(0.0, |e| e.log_phi) + 4.0 * f64::EPSILON * p.exact.log_phi.abs();
            let ratio = (p.exact.log_phi - p.approx.log_phi).exp();
            RatioRow {
                t: p.exact.t,
                exact: Some(p.exact.log_phi),
                asymptotic: Some(p.approx.log_phi),
                ratio: Some(ratio),
                ratio_error: Some(err * ratio),
                flag: None,
                note: None,
            }
        }),
        th.low_order,
    ));
    out.push(RatioSeries::new(
        "m",
        "m",
        build(&|p| {
            let err = p.exact.errors.as_ref().map_or(0.0, |e| e.m);
            RatioRow::divide(
                p.exact.t,
                p.exact.m,
                p.approx.m,
                err,
                p.tp.x_hat.abs().max(p.tp.sigma_hat()),
            )
        }),
        th.low_order,
    ));
    out.push(RatioSeries::new(
        "s2",
        "s^2",
        build(&|p| {
            let err = p.exact.errors.as_ref().map_or(0.0, |e| e.s2);
            RatioRow::divide(p.exact.t, p.exact.s2, p.approx.s2, err, p.tp.sigma_hat2)
        }),
        th.low_order,
    ));
    for j in 3..=j_max {
        out.push(RatioSeries::new(
            format!("mu{j}"),
            format!("mu_{j}"),
            build(&|p| {
                let err = p
                    .exact
                    .errors
                    .as_ref()
                    .and_then(|e| e.mu.get(&j).copied())
                    .unwrap_or(0.0);
                let scale = p.tp.sigma_hat().powi(j as i32);
                RatioRow::divide(p.exact.t, p.exact.mu[&j], p.approx.mu[&j], err, scale)
            }),
            th.high_order,
        ));
    }
    out
}

/// `Ψ(t, α) e^{-K̂}` against `σ̂^{α+1} T₁(t, α) e^{q(x̂)}`.
pub fn psi_alpha_series(model: &TailModel, ts: &[f64], alpha: u32, tol: f64, threshold: f64) -> RatioSeries {
    let rows = ts
        .par_iter()
        .map(|&t| {
            let row = || -> Result<RatioRow> {
                let tp = tilt_point(model, t)?;
                let (exact, err) = psi_alpha_normalized_with_error(model, t, alpha, tol)?;
                let approx = approx_psi_alpha(model, t, alpha)?;
                let scale = tp.sigma_hat().powi(alpha as i32 + 1) * model.q.eval(tp.x_hat)?.exp();
                Ok(RatioRow::divide(t, exact, approx, err, scale))
            };
            row().unwrap_or_else(|e| RatioRow::failed(t, &e))
        })
        .collect();
    RatioSeries::new(format!("psi_alpha{alpha}"), format!("Psi(t, {alpha})"), rows, threshold)
}

/// `max_λ |log Φ(t + λ/s) - log Φ(t) - λ m/s - λ²/2|`, the distance of the
/// standardized cumulant generating function from the Gaussian one.
pub fn mgf_convergence(model: &TailModel, t: f64, lambdas: &[f64], tol: f64) -> Result<f64> {
    let ex = exact_moments(model, t, 2, tol)?;
    let s = ex.s();
    let base = log_phi(model, t, tol)?;
    let mut worst = 0.0_f64;
    for &l in lambdas {
        let shifted = t + l / s;
        if !(shifted > 0.0) {
            return Err(Error::Precondition(format!(
                "t + lambda/s = {shifted} is not positive for lambda = {l}"
            )));
        }
        let lp = if shifted == t {
            base
        } else {
            log_phi(model, shifted, tol)?
        };
        worst = worst.max(((lp - base - l * ex.m / s) - 0.5 * l * l).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianRow {
    pub t: f64,
    pub ks_distance: Option<f64>,
    pub mgf_max_dev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSuite {
    pub rows: Vec<GaussianRow>,
    /// `None` for a single-row grid.
    pub ks_nonincreasing: Option<bool>,
    pub final_mgf_dev: Option<f64>,
    /// `None` when `ks_nonincreasing` is undefined.
    pub passed: Option<bool>,
}

pub fn gaussian_suite(model: &TailModel, ts: &[f64], lambdas: &[f64], tol: f64, th: &PassThresholds) -> GaussianSuite {
    let rows: Vec<GaussianRow> = ts
        .par_iter()
        .map(|&t| {
            let ks = ks_distance_to_normal(model, t);
            let mgf = mgf_convergence(model, t, lambdas, tol);
            let note = match (&ks, &mgf) {
                (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
                _ => None,
            };
            GaussianRow {
                t,
                ks_distance: ks.ok(),
                mgf_max_dev: mgf.ok(),
                note,
            }
        })
        .collect();
    let ks_nonincreasing = if rows.len() < 2 {
        None
    } else {
        Some(rows.windows(2).all(|w| match (w[0].ks_distance, w[1].ks_distance) {
            (Some(a), Some(b)) => b <= a + th.ks_noise,
            _ => false,
        }))
    };
    let final_mgf_dev = rows.last().and_then(|r| r.mgf_max_dev);
    let passed = ks_nonincreasing.map(|k| k && final_mgf_dev.is_some_and(|d| d < th.mgf_max_dev));
    GaussianSuite {
        rows,
        ks_nonincreasing,
        final_mgf_dev,
        passed,
    }
}

/// Little-o quantities of the proofs: `log σ̂ / ∫₁ᵗ ψ`, `|h''(x̂)| σ̂⁴` and
/// `|h''(x̂)| σ̂³ L(t)`, each expected to vanish.
pub fn lemma_records(model: &TailModel, ts: &[f64], s: &TrendSettings) -> Vec<TrendRecord> {
    let eps = s.trend_epsilon;
    let expected = TrendVerdict::ConvergesToZero;
    vec![
        TrendRecord::from_fn("log sigma_hat / integral of psi over [1, t]", ts, expected, eps, |t| {
            Ok(tilt_point(model, t)?.sigma_hat().ln() / integral_psi(model, t)?)
        }),
        TrendRecord::from_fn("|h''(x_hat)| sigma_hat^4", ts, expected, eps, |t| {
            let tp = tilt_point(model, t)?;
            Ok(tp.h2.abs() * tp.sigma_hat2 * tp.sigma_hat2)
        }),
        TrendRecord::from_fn("|h''(x_hat)| sigma_hat^3 L(t)", ts, expected, eps, |t| {
            let tp = tilt_point(model, t)?;
            Ok(tp.h2.abs() * tp.sigma_hat2 * tp.sigma_hat() * L_of(t)?)
        }),
    ]
}

/// Local uniform convergence of `h` with index `β` in Case 1, of `ψ` as a
/// slowly varying function in Case 2.
pub fn luc_records(model: &TailModel, cls: &VariationClass, ts: &[f64], s: &TrendSettings) -> Vec<TrendRecord> {
    let (name, mut recs) = match (cls.kind, cls.beta) {
        (VariationKind::RegularlyVarying, Some(beta)) => ("h", check_luc(|x| model.h(x), beta, &s.x_grid(), s)),
        (VariationKind::RapidlyVarying, _) => {
            // each point costs a window of inversions; one per decade suffices
            let coarse: Vec<f64> = ts.iter().step_by(s.t_per_decade.max(1)).copied().collect();
            ("psi", check_luc(|t| invert_h(model, t), 0.0, &coarse, s))
        }
        _ => return Vec::new(),
    };
    for r in &mut recs {
        r.label = r.label.replacen('l', name, 2);
    }
    recs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub label: String,
    pub config: DiagnosticsConfig,
    pub validation: ValidationReport,
    pub classification: VariationClass,
    /// Corollaries, inverse-derivative relations, local uniform convergence
    /// and the little-o quantities of the proofs.
    pub trend_records: Vec<TrendRecord>,
    /// `Φ`, `m`, `s²` and central moments.
    pub ratio_series: Vec<RatioSeries>,
    /// `Ψ(t, α)` for each configured `α`.
    pub lemma_series: Vec<RatioSeries>,
    pub gaussian_convergence: GaussianSuite,
    pub verdict: Verdict,
    pub failures: Vec<String>,
}

/// Validation, classification, condition checks, suites and verdict.
///
/// Only an invalid configuration is an error; numerical failures are recorded
/// in rows and count against the verdict.
pub fn assemble_report(model: &TailModel, cfg: &DiagnosticsConfig) -> Result<DiagnosticsReport> {
    cfg.check()?;
    let validation = validate_model(model);
    let mut report = DiagnosticsReport {
        label: model.label.clone(),
        config: cfg.clone(),
        validation,
        classification: VariationClass::unsupported("not classified"),
        trend_records: Vec::new(),
        ratio_series: Vec::new(),
        lemma_series: Vec::new(),
        gaussian_convergence: GaussianSuite {
            rows: Vec::new(),
            ks_nonincreasing: None,
            final_mgf_dev: None,
            passed: None,
        },
        verdict: Verdict::Unsupported,
        failures: Vec::new(),
    };
    if !report.validation.passed() {
        report.classification = VariationClass::unsupported("model validation failed");
        report.failures = report
            .validation
            .failures()
            .map(|c| format!("validation {}: {}", c.name, c.detail))
            .collect();
        return Ok(report);
    }
    report.classification = classify(model, &cfg.trend);
    let cls = &report.classification;
    if !cls.is_supported() {
        report.failures = cls.notes.clone();
        return Ok(report);
    }

    let mut failures = Vec::new();
    let mut records = Vec::new();
    match corollary_grid(model, cls, &cfg.trend) {
        Ok(ts) => {
            match check_corollaries(model, cls, &ts, &cfg.trend) {
                Ok(r) => records.extend(r),
                Err(e) => failures.push(format!("corollaries: {e}")),
            }
            if cls.kind == VariationKind::RapidlyVarying {
                match check_lemma_2_3(model, &ts, &cfg.trend) {
                    Ok(r) => records.extend(r),
                    Err(e) => failures.push(format!("inverse-derivative relations: {e}")),
                }
            }
            records.extend(luc_records(model, cls, &ts, &cfg.trend));
            records.extend(lemma_records(model, &ts, &cfg.trend));
        }
        Err(e) => failures.push(format!("trend grid: {e}")),
    }
    for r in records.iter().filter(|r| !r.passed) {
        failures.push(format!(
            "{}: expected {:?}, observed {:?}",
            r.label, r.expected, r.verdict
        ));
    }

    let th = &cfg.thresholds;
    let tol = cfg.quadrature_tol;
    let ratio_series = ratio_suite(model, &cfg.t_grid, cfg.j_max, tol, th);
    let lemma_series: Vec<RatioSeries> = cfg
        .psi_alphas
        .iter()
        .map(|&a| psi_alpha_series(model, &cfg.t_grid, a, tol, th.lemma))
        .collect();
    for s in ratio_series.iter().chain(&lemma_series) {
        if s.converged == Some(false) {
            failures.push(format!(
                "{}: not converged (final |ratio - 1| = {:?}, threshold {})",
                s.quantity, s.final_abs_dev, s.pass_threshold
            ));
        }
    }
    let gaussian = gaussian_suite(model, &cfg.t_grid, &cfg.lambda_grid, tol, th);
    if gaussian.passed == Some(false) {
        failures.push(format!(
            "Gaussian convergence: KS nonincreasing = {:?}, final mgf deviation = {:?}",
            gaussian.ks_nonincreasing, gaussian.final_mgf_dev
        ));
    }

    report.trend_records = records;
    report.ratio_series = ratio_series;
    report.lemma_series = lemma_series;
    report.gaussian_convergence = gaussian;
    report.verdict = if failures.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    report.failures = failures;
    Ok(report)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// Columns `t,exact,asymptotic,ratio`; skipped ratios are empty cells.
pub fn series_csv(s: &RatioSeries) -> String {
    let mut out = String::from("t,exact,asymptotic,ratio\n");
    for r in &s.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.t,
            cell(r.exact),
            cell(r.asymptotic),
            cell(r.ratio)
        );
    }
    out
}

pub fn gaussian_csv(g: &GaussianSuite) -> String {
    let mut out = String::from("t,ks_distance,mgf_max_dev\n");
    for r in &g.rows {
        let _ = writeln!(out, "{},{},{}", r.t, cell(r.ks_distance), cell(r.mgf_max_dev));
    }
    out
}

pub fn report_json(report: &DiagnosticsReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Precondition(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Writes `report.json` and, when `csv` is set, one CSV per series and
/// `gaussian.csv` into `dir`.
pub fn write_report(report: &DiagnosticsReport, dir: &Path, json: bool, csv: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        msg: e.to_string(),
    })?;
    let mut written = Vec::new();
    if json {
        let p = dir.join("report.json");
        write_file(&p, &report_json(report)?)?;
        written.push(p);
    }
    if csv {
        for s in report.ratio_series.iter().chain(&report.lemma_series) {
            let p = dir.join(format!("{}.csv", s.key));
            write_file(&p, &series_csv(s))?;
            written.push(p);
        }
        if !report.gaussian_convergence.rows.is_empty() {
            let p = dir.join("gaussian.csv");
            write_file(&p, &gaussian_csv(&report.gaussian_convergence))?;
            written.push(p);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_model;

    fn gauss() -> TailModel {
        TailModel::from_sources("x^2", "0", 0.0, "gauss").unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        let c = DiagnosticsConfig::default();
        c.check().unwrap();
        assert_eq!(c.t_grid.len(), 7);
        assert_eq!(c.t_grid[0], 10.0);
        assert_eq!(*c.t_grid.last().unwrap(), 1e4);
        assert_eq!(c.lambda_grid.len(), 9);
        let mut bad = c.clone();
        bad.j_max = 11;
        assert!(bad.check().is_err());
        bad = c.clone();
        bad.t_grid = vec![0.5, 10.0];
        assert!(bad.check().is_err());
    }

    #[test]
    fn series_rules() {
        let row = |t: f64, r: f64| RatioRow::divide(t, r, 1.0, 0.0, 1.0);
        let s = RatioSeries::new(
            "a",
            "a",
            vec![row(1.0, 1.3), row(2.0, 1.1), row(3.0, 1.01), row(4.0, 1.001)],
            0.02,
        );
        assert_eq!(s.converged, Some(true));
        assert!((s.final_abs_dev.unwrap() - 1e-3).abs() < 1e-15);
        let s = RatioSeries::new(
            "a",
            "a",
            vec![row(1.0, 1.3), row(2.0, 1.01), row(3.0, 1.001), row(4.0, 1.01)],
            0.02,
        );
        assert_eq!(s.converged, Some(false));
        let s = RatioSeries::new("a", "a", vec![row(1.0, 1.001)], 0.02);
        assert_eq!(s.converged, None);
        let z = RatioRow::divide(1.0, 1e-30, 0.0, 0.0, 1.0);
        assert_eq!(z.flag, Some(RowFlag::NearZeroDenominator));
        assert_eq!(z.ratio, None);
    }

    #[test]
    fn quadratic_third_moment_is_flagged() {
        let ts = log_grid(10.0, 1e3, 5);
        let suite = ratio_suite(&gauss(), &ts, 4, DEFAULT_TOL, &PassThresholds::default());
        let mu3 = suite.iter().find(|s| s.key == "mu3").unwrap();
        assert!(mu3.degenerate());
        assert_eq!(mu3.converged, None);
        let phi = &suite[0];
        assert!(phi.rows.iter().all(|r| (r.ratio.unwrap() - 1.0).abs() < 1e-9));
    }

    #[test]
    fn weibull_mean_series_converges() {
        let m = builtin_model("weibull", &[2.0]).unwrap();
        let ts = [10.0, 30.0, 100.0, 300.0, 1000.0];
        let suite = ratio_suite(&m, &ts, 4, DEFAULT_TOL, &PassThresholds::default());
        let mean = &suite[1];
        let devs: Vec<f64> = mean.rows.iter().map(|r| (r.ratio.unwrap() - 1.0).abs()).collect();
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
        assert_eq!(mean.converged, Some(true));
    }

    #[test]
    fn mgf_deviation() {
        let e = builtin_model("expexp", &[]).unwrap();
        assert_eq!(mgf_convergence(&e, 100.0, &[0.0], DEFAULT_TOL).unwrap(), 0.0);
        let lam = default_lambda_grid();
        let d: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&t| mgf_convergence(&e, t, &lam, DEFAULT_TOL).unwrap())
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
        assert!(mgf_convergence(&gauss(), 1e4, &lam, DEFAULT_TOL).unwrap() < 1e-6);
    }

    #[test]
    fn single_row_gaussian_suite() {
        let m = builtin_model("weibull", &[2.0]).unwrap();
        let g = gaussian_suite(
            &m,
            &[100.0],
            &default_lambda_grid(),
            DEFAULT_TOL,
            &PassThresholds::default(),
        );
        assert_eq!(g.rows.len(), 1);
        assert_eq!(g.ks_nonincreasing, None);
        assert_eq!(g.passed, None);
    }

    #[test]
    fn invalid_model_is_unsupported() {
        let m = TailModel::from_sources("x", "0", 0.0, "linear").unwrap();
        let r = assemble_report(&m, &DiagnosticsConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Unsupported);
        assert!(!r.validation.passed());
        assert!(!r.failures.is_empty());
    }

    #[test]
    fn csv_format() {
        let s = RatioSeries::new(
            "a",
            "a",
            vec![
                RatioRow::divide(10.0, 0.1, 0.3, 0.0, 1.0),
                RatioRow::divide(20.0, 1.0, 0.0, 0.0, 1.0),
            ],
            0.1,
        );
        let csv = series_csv(&s);
        assert_eq!(
            csv,
            "t,exact,asymptotic,ratio\n10,0.1,0.3,0.33333333333333337\n20,1,0,\n"
        );
    }
}
