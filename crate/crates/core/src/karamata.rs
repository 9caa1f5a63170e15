//! Regular and rapid variation of `h`, and grid trend tests for the
//! `o(1)` / `O(1)` hypotheses built on it.
//!
//! Every verdict here is evidence from a finite grid, not a proof.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{decade_grid, log_grid};
use crate::model::TailShape;
use crate::tilt::invert_h;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendSettings {
    pub trend_epsilon: f64,
    pub slope_cap: f64,
    /// Case 1 grid in `x`.
    pub x_start: f64,
    pub x_stop: f64,
    pub x_per_decade: usize,
    /// Case 2 grid in `t`.
    pub t_start: f64,
    pub t_stop: f64,
    pub t_per_decade: usize,
    /// Allowed excess of `θ` over `β - 2`.
    pub theta_tolerance: f64,
}

impl Default for TrendSettings {
    fn default() -> Self {
        TrendSettings {
            trend_epsilon: 1e-2,
            slope_cap: 8.0,
            x_start: 10.0,
            x_stop: 1e6,
            x_per_decade: 64,
            t_start: 10.0,
            t_stop: 1e300,
            t_per_decade: 8,
            theta_tolerance: 0.05,
        }
    }
}

impl TrendSettings {
    pub fn x_grid(&self) -> Vec<f64> {
        decade_grid(self.x_start, self.x_stop, self.x_per_decade)
    }

    pub fn t_grid(&self) -> Vec<f64> {
        decade_grid(self.t_start, self.t_stop, self.t_per_decade)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrendVerdict {
    ConvergesToZero,
    Bounded,
    Diverges,
    Inconclusive,
}

impl TrendVerdict {
    /// Whether an observed verdict meets this expectation.
    pub fn accepts(self, observed: TrendVerdict) -> bool {
        match self {
            TrendVerdict::ConvergesToZero => observed == TrendVerdict::ConvergesToZero,
            TrendVerdict::Bounded => matches!(observed, TrendVerdict::Bounded | TrendVerdict::ConvergesToZero),
            TrendVerdict::Diverges => observed == TrendVerdict::Diverges,
            TrendVerdict::Inconclusive => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRecord {
    pub label: String,
    pub grid: Vec<(f64, f64)>,
    pub verdict: TrendVerdict,
    /// Last `|value|` over the largest `|value|`.
    pub tail_ratio: f64,
    pub expected: TrendVerdict,
    pub passed: bool,
}

const NOISE_FLOOR: f64 = 1e-12;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b))
}

/// Envelope verdict on `|value|`.
///
/// `ConvergesToZero`: the envelope over the last quarter exceeds the one over
/// the third quarter by less than `epsilon / 10`, and every value in the last
/// eighth is below `epsilon`. `Bounded`: the last half stays within twice the
/// first half.
pub fn trend_verdict(values: &[f64], epsilon: f64) -> TrendVerdict {
    let n = values.len();
    if n < 8 || values.iter().any(|v| v.is_nan()) {
        return TrendVerdict::Inconclusive;
    }
    let a: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    if a.iter().any(|v| v.is_infinite()) {
        return TrendVerdict::Diverges;
    }
    let third = sup(&a[n / 2..3 * n / 4]);
    let fourth = sup(&a[3 * n / 4..]);
    let last_eighth = sup(&a[n - n / 8..]);
    if fourth <= third + 0.1 * epsilon && last_eighth < epsilon {
        return TrendVerdict::ConvergesToZero;
    }
    if sup(&a[n / 2..]) <= 2.0 * sup(&a[..n / 2]) + NOISE_FLOOR {
        TrendVerdict::Bounded
    } else {
        TrendVerdict::Diverges
    }
}

impl TrendRecord {
    pub fn new(label: impl Into<String>, grid: Vec<(f64, f64)>, expected: TrendVerdict, epsilon: f64) -> Self {
        let values: Vec<f64> = grid.iter().map(|p| p.1).collect();
        let verdict = trend_verdict(&values, epsilon);
        let peak = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let last = values.last().map_or(0.0, |v| v.abs());
        TrendRecord {
            label: label.into(),
            grid,
            verdict,
            tail_ratio: if peak > 0.0 { last / peak } else { 0.0 },
            expected,
            passed: expected.accepts(verdict),
        }
    }

    pub(crate) fn from_fn<F>(label: &str, xs: &[f64], expected: TrendVerdict, epsilon: f64, f: F) -> Self
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        let grid = xs.par_iter().map(|&x| (x, f(x).unwrap_or(f64::NAN))).collect();
        TrendRecord::new(label, grid, expected, epsilon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RvEstimate {
    Index {
        beta: f64,
        stderr: f64,
    },
    /// Local slopes per decade when they grow without bound.
    Diverging {
        decade_slopes: Vec<f64>,
    },
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - my - slope * (x - mx);
            r * r
        })
        .sum();
    let se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, se)
}

/// Regular-variation index of `h` by least squares of `log h` on `log x`.
///
/// Reports `Diverging` when `h` overflows, when a per-decade slope exceeds
/// `slope_cap`, or when every per-decade slope exceeds its predecessor by
/// more than 25%. The standard error folds in the spread of per-decade
/// slopes, which dominates the regression error for slowly settling `h`.
pub fn estimate_rv_index<F>(h: F, s: &TrendSettings) -> Result<RvEstimate>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let xs = s.x_grid();
    let decades = (s.x_stop / s.x_start).log10().round().max(1.0) as usize;
    let samples: Vec<Result<f64>> = xs.par_iter().map(|&x| h(x)).collect();
    let mut lx = Vec::with_capacity(xs.len());
    let mut lh = Vec::with_capacity(xs.len());
    for (&x, r) in xs.iter().zip(samples) {
        let v = match r {
            Ok(v) if v.is_finite() => v,
            Ok(_) | Err(Error::Overflow { .. }) => {
                return Ok(RvEstimate::Diverging {
                    decade_slopes: decade_slopes(&lx, &lh, decades),
                })
            }
            Err(e) => return Err(e),
        };
        if !(v > 0.0) {
            return Err(Error::Precondition(format!("h({x}) = {v} is not positive")));
        }
        lx.push(x.ln());
        lh.push(v.ln());
    }
    let slopes = decade_slopes(&lx, &lh, decades);
    let capped = slopes.iter().any(|&b| b > s.slope_cap);
    let accelerating = slopes.len() >= 2 && slopes.windows(2).all(|w| w[0] > 0.0 && w[1] > 1.25 * w[0]);
    if capped || accelerating {
        return Ok(RvEstimate::Diverging { decade_slopes: slopes });
    }
    let (beta, se) = ols(&lx, &lh);
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let spread = slopes.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / slopes.len() as f64;
    Ok(RvEstimate::Index {
        beta,
        stderr: (se * se + spread).sqrt(),
    })
}

fn decade_slopes(lx: &[f64], lh: &[f64], decades: usize) -> Vec<f64> {
    if lx.len() < 2 {
        return Vec::new();
    }
    let per = ((lx.len() - 1) / decades).max(1);
    (0..decades)
        .map(|d| (d * per, ((d + 1) * per).min(lx.len() - 1)))
        .filter(|(a, b)| b > a)
        .map(|(a, b)| (lh[b] - lh[a]) / (lx[b] - lx[a]))
        .collect()
}

pub fn estimate_rv_index_of<S: TailShape + ?Sized>(m: &S, s: &TrendSettings) -> Result<RvEstimate> {
    estimate_rv_index(|x| m.h(x), s)
}

/// `ε(x) = x h'(x)/h(x) - β`.
pub fn epsilon_x<S: TailShape + ?Sized>(m: &S, beta: f64, x: f64) -> Result<f64> {
    let d = m.h_derivs(x)?;
    if d[0] == 0.0 {
        return Err(Error::Precondition(format!("h({x}) = 0")));
    }
    Ok(x * d[1] / d[0] - beta)
}

/// `(ε, ε', ε'')` at `x` from the jets of `h`.
fn epsilon_x_jet<S: TailShape + ?Sized>(m: &S, x: f64) -> Result<[f64; 3]> {
    let [h, h1, h2, h3] = m.h_derivs(x)?;
    if h == 0.0 {
        return Err(Error::Precondition(format!("h({x}) = 0")));
    }
    // ε + β = x r with r = h'/h, r' = h''/h - r², r'' = h'''/h - 3 r h''/h + 2 r³
    let r = h1 / h;
    let r1 = h2 / h - r * r;
    let r2 = h3 / h - 3.0 * r * h2 / h + 2.0 * r * r * r;
    Ok([x * r, r + x * r1, 2.0 * r1 + x * r2])
}

/// `ε(t) = t ψ'(t)/ψ(t)` with `ψ' = 1/h'(ψ)`.
pub fn epsilon_t<S: TailShape + ?Sized>(m: &S, t: f64) -> Result<f64> {
    let psi = invert_h(m, t)?;
    if !(psi > 0.0) {
        return Err(Error::Precondition(format!("ψ({t}) = {psi} is not positive")));
    }
    Ok(t / (m.h_derivs(psi)?[1] * psi))
}

/// `(ε, t ε'/ε, t² ε''/ε)`, from `a(t) = h'(ψ) ψ` and `ε = t / a`.
///
/// Every factor is a ratio against `h'(ψ)`, so nothing overflows before `h` does.
fn epsilon_t_jet<S: TailShape + ?Sized>(m: &S, t: f64) -> Result<[f64; 3]> {
    let psi = invert_h(m, t)?;
    if !(psi > 0.0) {
        return Err(Error::Precondition(format!("ψ({t}) = {psi} is not positive")));
    }
    let [_, h1, h2, h3] = m.h_derivs(psi)?;
    let u = t / h1;
    let c2 = h2 / h1;
    let c3 = h3 / h1;
    let a1 = c2 * psi + 1.0;
    // t a'/a and t² a''/a
    let r1 = u * a1 / psi;
    let r2 = u * u * (c3 * psi + 2.0 * c2 - a1 * c2) / psi;
    Ok([u / psi, 1.0 - r1, 2.0 * r1 * r1 - 2.0 * r1 - r2])
}

/// `ψ'(t)` by Richardson-extrapolated central differences of the inverse.
pub fn psi_prime_fd<S: TailShape + ?Sized>(m: &S, t: f64) -> Result<f64> {
    let d = |step: f64| -> Result<f64> { Ok((invert_h(m, t + step)? - invert_h(m, t - step)?) / (2.0 * step)) };
    let step = 1e-3 * t;
    Ok((4.0 * d(0.5 * step)? - d(step)?) / 3.0)
}

/// Local slope of `ln f` against `ln x` by a symmetric log-step difference.
fn log_slope<F: Fn(f64) -> Result<f64>>(f: F, x: f64) -> Result<f64> {
    let r = 1.01_f64;
    Ok((f(x * r)?.abs().ln() - f(x / r)?.abs().ln()) / (2.0 * r.ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case1Report {
    pub records: Vec<TrendRecord>,
    /// Index of `|h''|`; `None` when `h''` vanishes on the grid.
    pub theta: Option<f64>,
    pub theta_passes: bool,
}

impl Case1Report {
    pub fn passed(&self) -> bool {
        self.theta_passes && self.records.iter().all(|r| r.passed)
    }
}

/// Trend records for `ε(x) = o(1)`, `x ε'(x) = O(1)`, `x² ε''(x) = O(1)` and
/// the bound `θ ≤ β - 2` on the index of `|h''|`.
pub fn check_case1_conditions<S: TailShape + ?Sized>(m: &S, beta: f64, s: &TrendSettings) -> Case1Report {
    let xs = s.x_grid();
    let eps = s.trend_epsilon;
    let jets: Vec<Result<[f64; 3]>> = xs.par_iter().map(|&x| epsilon_x_jet(m, x)).collect();
    let pick = |k: usize, f: &dyn Fn(f64, f64) -> f64| -> Vec<(f64, f64)> {
        xs.iter()
            .zip(&jets)
            .map(|(&x, j)| (x, j.as_ref().map_or(f64::NAN, |j| f(x, j[k]))))
            .collect()
    };
    let records = vec![
        TrendRecord::new(
            "epsilon(x)",
            pick(0, &|_, e| e - beta),
            TrendVerdict::ConvergesToZero,
            eps,
        ),
        TrendRecord::new(
            "x |epsilon'(x)|",
            pick(1, &|x, e| x * e.abs()),
            TrendVerdict::Bounded,
            eps,
        ),
        TrendRecord::new(
            "x^2 |epsilon''(x)|",
            pick(2, &|x, e| x * x * e.abs()),
            TrendVerdict::Bounded,
            eps,
        ),
    ];
    let theta = estimate_theta(m, &xs);
    let theta_passes = match theta {
        None => true,
        Some(th) => th <= beta - 2.0 + s.theta_tolerance,
    };
    Case1Report {
        records,
        theta,
        theta_passes,
    }
}

fn estimate_theta<S: TailShape + ?Sized>(m: &S, xs: &[f64]) -> Option<f64> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &x in xs {
        if let Ok(d) = m.h_derivs(x) {
            let v = d[2].abs();
            if v > 0.0 && v.is_finite() {
                lx.push(x.ln());
                ly.push(v.ln());
            }
        }
    }
    if lx.len() < xs.len() / 2 || lx.len() < 3 {
        return None;
    }
    Some(ols(&lx, &ly).0)
}

/// Trend records for `ε(t) → 0`, `t ε'(t)/ε(t) → 0`, `t² ε''(t)/ε(t) → 0`.
pub fn check_case2_conditions<S: TailShape + ?Sized>(m: &S, s: &TrendSettings) -> Vec<TrendRecord> {
    let ts = s.t_grid();
    let eps = s.trend_epsilon;
    let jets: Vec<Result<[f64; 3]>> = ts.par_iter().map(|&t| epsilon_t_jet(m, t)).collect();
    let pick = |f: &dyn Fn(f64, &[f64; 3]) -> f64| -> Vec<(f64, f64)> {
        ts.iter()
            .zip(&jets)
            .map(|(&t, j)| (t, j.as_ref().map_or(f64::NAN, |j| f(t, j))))
            .collect()
    };
    vec![
        TrendRecord::new("epsilon(t)", pick(&|_, j| j[0]), TrendVerdict::ConvergesToZero, eps),
        TrendRecord::new(
            "t epsilon'(t) / epsilon(t)",
            pick(&|_, j| j[1]),
            TrendVerdict::ConvergesToZero,
            eps,
        ),
        TrendRecord::new(
            "t^2 epsilon''(t) / epsilon(t)",
            pick(&|_, j| j[2]),
            TrendVerdict::ConvergesToZero,
            eps,
        ),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QVerdict {
    Pass,
    Fail,
    /// `q` is eventually constant; the index condition is taken as met.
    AlwaysPass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QCheck {
    /// Index of `|q|`; 0 for constant `q`.
    pub eta: f64,
    /// Strict upper bound required of `eta`.
    pub bound: f64,
    pub verdict: QVerdict,
    /// Whether `eta < bound` holds literally.
    pub inequality_holds: bool,
    pub record: TrendRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariationKind {
    RegularlyVarying,
    RapidlyVarying,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationClass {
    pub kind: VariationKind,
    pub beta: Option<f64>,
    pub beta_stderr: Option<f64>,
    pub theta: Option<f64>,
    pub eta: Option<f64>,
    pub q_verdict: Option<QVerdict>,
    pub evidence: Vec<TrendRecord>,
    pub notes: Vec<String>,
}

impl VariationClass {
    pub fn unsupported(note: impl Into<String>) -> Self {
        VariationClass {
            kind: VariationKind::Unsupported,
            beta: None,
            beta_stderr: None,
            theta: None,
            eta: None,
            q_verdict: None,
            evidence: Vec::new(),
            notes: vec![note.into()],
        }
    }

    pub fn is_supported(&self) -> bool {
        self.kind != VariationKind::Unsupported
    }

    /// Case 1 class with known indices, for use without a classification run.
    pub fn regularly_varying(beta: f64, theta: f64) -> Self {
        VariationClass {
            kind: VariationKind::RegularlyVarying,
            beta: Some(beta),
            theta: Some(theta),
            ..VariationClass::unsupported("constructed")
        }
    }
}

/// Index `η` of `|q|` against the bound of the variation case.
///
/// Case 1 regresses `ln|q(x)|` on `ln x`; Case 2 regresses `ln|q(ψ(t))|` on
/// `ln t`. Constant `q` yields `AlwaysPass` with `η = 0`.
pub fn check_q_conditions<S: TailShape + ?Sized>(m: &S, cls: &VariationClass, s: &TrendSettings) -> QCheck {
    let (bound, points) = match cls.kind {
        VariationKind::RapidlyVarying => {
            let ts = log_grid(s.t_start, s.t_stop.min(1e100), 200);
            let pts: Vec<(f64, f64)> = ts
                .par_iter()
                .map(|&t| (t, invert_h(m, t).and_then(|x| m.q(x)).unwrap_or(f64::NAN)))
                .collect();
            (-0.5, pts)
        }
        _ => {
            let beta = cls.beta.unwrap_or(f64::NAN);
            let theta = cls.theta.unwrap_or(f64::NEG_INFINITY);
            let pts = s.x_grid().iter().map(|&x| (x, m.q(x).unwrap_or(f64::NAN))).collect();
            (theta - 1.5 * beta - 1.5, pts)
        }
    };
    let half = points.len() / 2;
    let upper = &points[half..];
    let constant =
        m.q_is_constant() || (upper.iter().all(|p| p.1.is_finite()) && upper.iter().all(|p| p.1 == upper[0].1));
    let record = TrendRecord::new(
        "|q|",
        points.iter().map(|&(x, v)| (x, v.abs())).collect(),
        TrendVerdict::Bounded,
        s.trend_epsilon,
    );
    if constant {
        return QCheck {
            eta: 0.0,
            bound,
            verdict: QVerdict::AlwaysPass,
            inequality_holds: 0.0 < bound,
            record,
        };
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.1.is_finite() && p.1 != 0.0)
        .map(|p| (p.0.ln(), p.1.abs().ln()))
        .unzip();
    let eta = if lx.len() >= 3 { ols(&lx, &ly).0 } else { f64::NAN };
    let holds = eta < bound;
    QCheck {
        eta,
        bound,
        verdict: if holds { QVerdict::Pass } else { QVerdict::Fail },
        inequality_holds: holds,
        record,
    }
}

/// Case 1 or Case 2 by the growth of `h`, confirmed by the condition checks.
pub fn classify<S: TailShape + ?Sized>(m: &S, s: &TrendSettings) -> VariationClass {
    let est = match estimate_rv_index_of(m, s) {
        Ok(e) => e,
        Err(e) => return VariationClass::unsupported(format!("index estimation failed: {e}")),
    };
    match est {
        RvEstimate::Index { beta, stderr } => {
            if !(beta - 2.0 * stderr > 0.0 && beta > 1e-3) {
                let mut c = VariationClass::unsupported(format!("h does not grow: index {beta} ± {stderr}"));
                c.beta = Some(beta);
                c.beta_stderr = Some(stderr);
                return c;
            }
            let case1 = check_case1_conditions(m, beta, s);
            let mut cls = VariationClass {
                kind: VariationKind::RegularlyVarying,
                beta: Some(beta),
                beta_stderr: Some(stderr),
                theta: case1.theta,
                eta: None,
                q_verdict: None,
                evidence: case1.records.clone(),
                notes: Vec::new(),
            };
            if !case1.theta_passes {
                cls.notes.push(format!(
                    "index of |h''| {} exceeds beta - 2 = {}",
                    case1.theta.unwrap_or(f64::NAN),
                    beta - 2.0
                ));
            }
            finish(m, cls, case1.passed(), s)
        }
        RvEstimate::Diverging { .. } => {
            let records = check_case2_conditions(m, s);
            let ok = records.iter().all(|r| r.passed);
            let cls = VariationClass {
                kind: VariationKind::RapidlyVarying,
                beta: None,
                beta_stderr: None,
                theta: None,
                eta: None,
                q_verdict: None,
                evidence: records,
                notes: Vec::new(),
            };
            finish(m, cls, ok, s)
        }
    }
}

fn finish<S: TailShape + ?Sized>(
    m: &S,
    mut cls: VariationClass,
    conditions_ok: bool,
    s: &TrendSettings,
) -> VariationClass {
    for r in cls.evidence.iter().filter(|r| !r.passed) {
        cls.notes.push(format!(
            "{}: expected {:?}, observed {:?}",
            r.label, r.expected, r.verdict
        ));
    }
    let q = check_q_conditions(m, &cls, s);
    cls.eta = Some(q.eta);
    cls.q_verdict = Some(q.verdict);
    if q.verdict == QVerdict::AlwaysPass && !q.inequality_holds {
        cls.notes.push(format!(
            "q is eventually constant: index condition eta < {} taken as met",
            q.bound
        ));
    }
    cls.evidence.push(q.record);
    if !conditions_ok || q.verdict == QVerdict::Fail {
        if q.verdict == QVerdict::Fail {
            cls.notes
                .push(format!("index of |q| {} is not below {}", q.eta, q.bound));
        }
        cls.kind = VariationKind::Unsupported;
    }
    cls
}

/// `h'(ψ)ψ' = 1` with `ψ'` by differences, and the ratios
/// `h''(ψ) ψ² ε² / t` and `h'''(ψ) ψ³ ε³ / t`, each minus 1.
pub fn check_lemma_2_3<S: TailShape + ?Sized>(m: &S, ts: &[f64], s: &TrendSettings) -> Result<Vec<TrendRecord>> {
    if let RvEstimate::Index { beta, .. } = estimate_rv_index_of(m, s)? {
        return Err(Error::Precondition(format!(
            "the inverse-derivative relations hold for rapidly varying h; h has index {beta}"
        )));
    }
    let eps = s.trend_epsilon;
    let rows: Vec<Result<[f64; 3]>> = ts
        .par_iter()
        .map(|&t| {
            let psi = invert_h(m, t)?;
            let d = m.h_derivs(psi)?;
            let e = epsilon_t(m, t)?;
            let identity = d[1] * psi_prime_fd(m, t)? - 1.0;
            let pe = psi * e;
            let r2 = d[2] / t * pe * pe - 1.0;
            let r3 = d[3] / t * pe.powi(3) - 1.0;
            Ok([identity, r2, r3])
        })
        .collect();
    let col = |k: usize| -> Vec<(f64, f64)> {
        ts.iter()
            .zip(&rows)
            .map(|(&t, r)| (t, r.as_ref().map_or(f64::NAN, |r| r[k])))
            .collect()
    };
    Ok(vec![
        TrendRecord::new("h'(psi) psi' - 1", col(0), TrendVerdict::ConvergesToZero, eps),
        TrendRecord::new(
            "h''(psi) psi^2 eps^2 / t - 1",
            col(1),
            TrendVerdict::ConvergesToZero,
            eps,
        ),
        TrendRecord::new(
            "h'''(psi) psi^3 eps^3 / t - 1",
            col(2),
            TrendVerdict::ConvergesToZero,
            eps,
        ),
    ])
}

/// Derivative and index relations of `h` and `ψ` for the class at hand.
pub fn check_corollaries<S: TailShape + ?Sized>(
    m: &S,
    cls: &VariationClass,
    ts: &[f64],
    s: &TrendSettings,
) -> Result<Vec<TrendRecord>> {
    let eps = s.trend_epsilon;
    match cls.kind {
        VariationKind::RegularlyVarying => {
            let beta = cls
                .beta
                .ok_or_else(|| Error::Precondition("regularly varying class without an index".into()))?;
            let xs = s.x_grid();
            Ok(vec![
                TrendRecord::from_fn(
                    "x h'(x) / (beta h(x)) - 1",
                    &xs,
                    TrendVerdict::ConvergesToZero,
                    eps,
                    |x| {
                        let d = m.h_derivs(x)?;
                        Ok(x * d[1] / (beta * d[0]) - 1.0)
                    },
                ),
                TrendRecord::from_fn(
                    "sigma^2 beta t / psi - 1",
                    ts,
                    TrendVerdict::ConvergesToZero,
                    eps,
                    |t| {
                        let psi = invert_h(m, t)?;
                        Ok(beta * t / (m.h_derivs(psi)?[1] * psi) - 1.0)
                    },
                ),
                TrendRecord::from_fn("index of psi - 1/beta", ts, TrendVerdict::ConvergesToZero, eps, |t| {
                    Ok(log_slope(|u| invert_h(m, u), t)? - 1.0 / beta)
                }),
            ])
        }
        VariationKind::RapidlyVarying => Ok(vec![
            TrendRecord::from_fn(
                "sigma^2 t / (psi eps) - 1",
                ts,
                TrendVerdict::ConvergesToZero,
                eps,
                |t| {
                    let psi = invert_h(m, t)?;
                    let e = t * psi_prime_fd(m, t)? / psi;
                    Ok(t / (m.h_derivs(psi)?[1] * psi * e) - 1.0)
                },
            ),
            TrendRecord::from_fn("index of psi", ts, TrendVerdict::ConvergesToZero, eps, |t| {
                log_slope(|u| invert_h(m, u), t)
            }),
        ]),
        VariationKind::Unsupported => Err(Error::Precondition("corollaries need a supported class".into())),
    }
}

/// The `t` grid for the corollaries: the Case 2 grid for rapid variation,
/// and for regular variation the geometric grid of the same density up to
/// `h` at the top of the `x` grid, so that `ψ` stays where `ε(x)` was checked.
pub fn corollary_grid<S: TailShape + ?Sized>(m: &S, cls: &VariationClass, s: &TrendSettings) -> Result<Vec<f64>> {
    match cls.kind {
        VariationKind::RegularlyVarying => {
            let top = m.h(s.x_stop)?;
            if !(top > s.t_start) {
                return Err(Error::Precondition(format!(
                    "h({}) = {top} is below the t grid start",
                    s.x_stop
                )));
            }
            Ok(decade_grid(s.t_start, top, s.t_per_decade))
        }
        VariationKind::RapidlyVarying => Ok(s.t_grid()),
        VariationKind::Unsupported => Err(Error::Precondition("corollaries need a supported class".into())),
    }
}

/// Local uniform convergence of `l` near `t`: the grid supremum of `|l(t+x)|`
/// over `|x| ≤ √t` against `|l(t)|` (target 1), and over `|x| ≤ a t` with
/// `a = 1/2` against `max((1+a)^α, (1-a)^α)`. Values are ratio minus target.
pub fn check_luc<F>(l: F, alpha: f64, ts: &[f64], s: &TrendSettings) -> Vec<TrendRecord>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    const A: f64 = 0.5;
    const POINTS: usize = 65;
    let window_sup = |t: f64, half: f64| -> Result<f64> {
        let lo = (t - half).max(t * 1e-9);
        let mut best = 0.0_f64;
        for i in 0..POINTS {
            let x = lo + (t + half - lo) * i as f64 / (POINTS - 1) as f64;
            best = best.max(l(x)?.abs());
        }
        Ok(best / l(t)?.abs())
    };
    let target = (1.0 + A).powf(alpha).max((1.0 - A).powf(alpha));
    vec![
        TrendRecord::from_fn(
            "sup |l(t+x)|/|l(t)| over |x| <= sqrt(t) - 1",
            ts,
            TrendVerdict::ConvergesToZero,
            s.trend_epsilon,
            |t| Ok(window_sup(t, t.sqrt())? - 1.0),
        ),
        TrendRecord::from_fn(
            "sup |l(t+x)|/|l(t)| over |x| <= t/2 - target",
            ts,
            TrendVerdict::ConvergesToZero,
            s.trend_epsilon,
            |t| Ok(window_sup(t, A * t)? - target),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_model, TailModel};

    fn settings() -> TrendSettings {
        TrendSettings::default()
    }

    struct Oscillating;

    impl TailShape for Oscillating {
        fn h_derivs(&self, x: f64) -> Result<[f64; 4]> {
            // h = x (2 + sin ln x)
            let (s, c) = x.ln().sin_cos();
            Ok([x * (2.0 + s), 2.0 + s + c, (c - s) / x, -2.0 * c / (x * x)])
        }
        fn q(&self, _: f64) -> Result<f64> {
            Ok(0.0)
        }
        fn domain_low(&self) -> f64 {
            0.0
        }
        fn q_is_constant(&self) -> bool {
            true
        }
    }

    #[test]
    fn trend_verdicts() {
        let dec: Vec<f64> = (1..=64).map(|i| 1.0 / i as f64).collect();
        assert_eq!(trend_verdict(&dec, 0.1), TrendVerdict::ConvergesToZero);
        let late_rise: Vec<f64> = (1..=64).map(|i| if i > 56 { 0.005 } else { 1e-4 }).collect();
        assert_ne!(trend_verdict(&late_rise, 0.01), TrendVerdict::ConvergesToZero);
        let flat = vec![0.5; 64];
        assert_eq!(trend_verdict(&flat, 0.01), TrendVerdict::Bounded);
        let grow: Vec<f64> = (1..=64).map(|i| (i * i) as f64).collect();
        assert_eq!(trend_verdict(&grow, 0.01), TrendVerdict::Diverges);
        assert_eq!(trend_verdict(&[f64::NAN; 64], 0.01), TrendVerdict::Inconclusive);
        assert_eq!(trend_verdict(&[0.0; 3], 0.01), TrendVerdict::Inconclusive);
        assert_eq!(trend_verdict(&[1e-17; 64], 0.01), TrendVerdict::ConvergesToZero);
    }

    #[test]
    fn power_law_index_exact() {
        match estimate_rv_index(|x| Ok(2.0 * x), &settings()).unwrap() {
            RvEstimate::Index { beta, stderr } => {
                assert!((beta - 1.0).abs() < 1e-9);
                assert!(stderr < 1e-9);
            }
            other => panic!("{other:?}"),
        }
        assert!(estimate_rv_index(|x| Ok(-x), &settings()).is_err());
    }

    #[test]
    fn weibull_indices() {
        for k in [1.5, 2.0, 3.0, 4.0] {
            let m = builtin_model("weibull", &[k]).unwrap();
            match estimate_rv_index_of(&m, &settings()).unwrap() {
                RvEstimate::Index { beta, stderr } => {
                    assert!((beta - (k - 1.0)).abs() < 0.02, "{k} {beta}");
                    assert!((beta - (k - 1.0)).abs() <= 2.0 * stderr, "{k} {beta} {stderr}");
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn expexp_diverges() {
        let m = builtin_model("expexp", &[]).unwrap();
        assert!(matches!(
            estimate_rv_index_of(&m, &settings()).unwrap(),
            RvEstimate::Diverging { .. }
        ));
    }

    #[test]
    fn epsilon_examples() {
        let m = builtin_model("weibull", &[2.0]).unwrap();
        assert!((epsilon_x(&m, 1.0, 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((epsilon_x(&m, 1.0, 10.0).unwrap() - 2.0 / 199.0).abs() < 1e-15);
        let lin = TailModel::from_sources("x^2", "0", 0.0, "lin").unwrap();
        assert_eq!(epsilon_x(&lin, 1.0, 37.0).unwrap(), 0.0);
        let e = builtin_model("expexp", &[]).unwrap();
        assert!((epsilon_t(&e, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((epsilon_t(&e, std::f64::consts::E).unwrap() - 0.5).abs() < 1e-14);
        assert!((epsilon_t(&e, 1e200).unwrap() * (1e200f64.ln() + 1.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn epsilon_jets_match_differences() {
        let m = builtin_model("weibull", &[3.0]).unwrap();
        let closed = |x: f64| 6.0 / (3.0 * x.powi(3) - 2.0);
        for &x in &[2.0, 20.0, 200.0] {
            let j = epsilon_x_jet(&m, x).unwrap();
            let h = 1e-4 * x;
            let d1 = (closed(x + h) - closed(x - h)) / (2.0 * h);
            let d2 = (closed(x + h) - 2.0 * closed(x) + closed(x - h)) / (h * h);
            assert!((j[0] - 2.0 - closed(x)).abs() < 1e-14, "{x}");
            assert!((j[1] - d1).abs() < 1e-6 * d1.abs(), "{x}");
            assert!((j[2] - d2).abs() < 1e-4 * d2.abs(), "{x} {} {d2}", j[2]);
        }
        let e = builtin_model("expexp", &[]).unwrap();
        for &t in &[5.0, 1e3, 1e8, 1e300] {
            let j = epsilon_t_jet(&e, t).unwrap();
            let l = t.ln() + 1.0;
            assert!((j[0] - 1.0 / l).abs() < 1e-12 / l);
            assert!((j[1] + 1.0 / l).abs() < 1e-9 / l, "{t} {}", j[1]);
            let want = 1.0 / l + 2.0 / (l * l);
            assert!((j[2] - want).abs() < 1e-8 * want, "{t} {}", j[2]);
        }
    }

    #[test]
    fn classify_builtins() {
        let c = classify(&builtin_model("weibull", &[2.0]).unwrap(), &settings());
        assert_eq!(c.kind, VariationKind::RegularlyVarying, "{:?}", c.notes);
        assert!((c.beta.unwrap() - 1.0).abs() < 0.02);
        assert!((c.theta.unwrap() + 3.0).abs() < 0.05);
        assert_eq!(c.q_verdict, Some(QVerdict::AlwaysPass));
        let c = classify(&builtin_model("expexp", &[]).unwrap(), &settings());
        assert_eq!(c.kind, VariationKind::RapidlyVarying, "{:?}", c.notes);
        let c = classify(&TailModel::from_sources("x", "0", 0.0, "linear").unwrap(), &settings());
        assert_eq!(c.kind, VariationKind::Unsupported);
    }

    #[test]
    fn pure_power_passes_case1() {
        let m = TailModel::from_sources("x^2", "0", 0.0, "sq").unwrap();
        let r = check_case1_conditions(&m, 1.0, &settings());
        assert!(r.passed(), "{r:?}");
        assert!(r.records[0].grid.iter().all(|p| p.1.abs() < 1e-15));
        assert_eq!(r.theta, None);
    }

    #[test]
    fn oscillating_epsilon_fails() {
        let r = check_case1_conditions(&Oscillating, 1.0, &settings());
        assert!(!r.records[0].passed);
        assert_eq!(classify(&Oscillating, &settings()).kind, VariationKind::Unsupported);
    }

    #[test]
    fn power_law_misread_as_rapid_fails_case2() {
        let m = TailModel::from_sources("x^3", "0", 0.0, "cube").unwrap();
        let r = check_case2_conditions(&m, &settings());
        assert!(!r[0].passed);
        // ε(t) → 1/β = 1/2
        let at = r[0].grid.iter().find(|p| p.0 >= 1e20).unwrap();
        assert!((at.1 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn q_conditions() {
        let w = builtin_model("weibull", &[2.0]).unwrap();
        let cls = VariationClass::regularly_varying(1.0, -3.0);
        let q = check_q_conditions(&w, &cls, &settings());
        assert_eq!(q.verdict, QVerdict::AlwaysPass);
        assert_eq!(q.eta, 0.0);
        assert!(!q.inequality_holds);
        assert_eq!(q.bound, -6.0);

        let zero = TailModel::from_sources("x^2", "0", 0.0, "z").unwrap();
        assert_eq!(
            check_q_conditions(&zero, &cls, &settings()).verdict,
            QVerdict::AlwaysPass
        );

        let decaying = TailModel::from_sources("x^2", "x^-5", 0.0, "d").unwrap();
        let cls = VariationClass::regularly_varying(1.0, -1.0);
        let q = check_q_conditions(&decaying, &cls, &settings());
        assert!((q.eta + 5.0).abs() < 1e-9);
        assert_eq!(q.verdict, QVerdict::Pass);
    }

    #[test]
    fn rapid_derivative_identities_on_expexp() {
        let e = builtin_model("expexp", &[]).unwrap();
        let ts = log_grid(10.0, 1e20, 40);
        let recs = check_lemma_2_3(&e, &ts, &settings()).unwrap();
        assert!(recs.iter().all(|r| r.passed), "{recs:?}");
        assert!(recs[0].grid.iter().all(|p| p.1.abs() < 1e-10));
        assert!(recs[1].grid.iter().all(|p| p.1.abs() < 1e-12));
        let w = builtin_model("weibull", &[2.0]).unwrap();
        assert!(matches!(
            check_lemma_2_3(&w, &ts, &settings()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn corollaries() {
        let w = builtin_model("weibull", &[2.0]).unwrap();
        let cls = classify(&w, &settings());
        let ts = corollary_grid(&w, &cls, &settings()).unwrap();
        assert!((ts.last().unwrap() / 2e6 - 1.0).abs() < 1e-12);
        let recs = check_corollaries(&w, &cls, &ts, &settings()).unwrap();
        assert!(recs.iter().all(|r| r.passed), "{recs:?}");
        let e = builtin_model("expexp", &[]).unwrap();
        let cls = classify(&e, &settings());
        let ts = corollary_grid(&e, &cls, &settings()).unwrap();
        let recs = check_corollaries(&e, &cls, &ts, &settings()).unwrap();
        assert!(recs[0].grid.iter().all(|p| p.1.abs() < 1e-9), "{:?}", recs[0]);
        assert!(recs.iter().all(|r| r.passed), "{recs:?}");
    }

    #[test]
    fn luc_examples() {
        let ts = log_grid(10.0, 1e20, 40);
        let s = settings();
        let r = check_luc(|x| Ok(x.ln()), 0.0, &ts, &s);
        assert!(r.iter().all(|r| r.passed), "{r:?}");
        let r = check_luc(|_| Ok(3.0), 0.0, &ts, &s);
        assert!(r.iter().all(|r| r.grid.iter().all(|p| p.1 == 0.0)));
        let r = check_luc(Ok, 1.0, &ts, &s);
        assert!(r[1].grid.iter().all(|p| p.1.abs() < 1e-12));
    }

    #[test]
    fn classification_is_deterministic() {
        let m = builtin_model("weibull", &[3.0]).unwrap();
        let a = serde_json::to_string(&classify(&m, &settings())).unwrap();
        let b = serde_json::to_string(&classify(&m, &settings())).unwrap();
        assert_eq!(a, b);
    }
}
