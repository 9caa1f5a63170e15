//! Adaptive Gauss–Kronrod (10/21) quadrature over a shared partition.
//!
//! Several integrands evaluated at the same abscissae are integrated
//! together, so every component sees the same adaptive partition. Segments
//! are refined by bisecting the one with the largest normalized error;
//! totals are always summed in left-to-right order, which makes results
//! independent of the refinement history.

// Kronrod tables keep their published digits.
#![allow(clippy::excessive_precision)]

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_980_191,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub segments_used: usize,
}

/// Tolerances for an adaptive run. A component has converged when its
/// summed error estimate is below `max(abs_tol, rel_tol * ∫|f|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_segments: usize,
}

impl Tolerance {
    pub fn relative(rel_tol: f64) -> Self {
        Tolerance {
            rel_tol,
            abs_tol: 0.0,
            max_segments: 4000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub a: f64,
    pub b: f64,
    pub value: Vec<f64>,
    pub error: Vec<f64>,
    pub abs: Vec<f64>,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

/// One 21-point Kronrod evaluation of all `n` components on `[a, b]`.
pub fn gk21<F>(f: &mut F, a: f64, b: f64, n: usize) -> Result<Segment>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let mut fc = vec![0.0; n];
    f(center, &mut fc)?;
    let mut fv1 = vec![vec![0.0; n]; 10];
    let mut fv2 = vec![vec![0.0; n]; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        f(center - dx, &mut fv1[j])?;
        f(center + dx, &mut fv2[j])?;
    }

    let mut seg = Segment {
        a,
        b,
        value: vec![0.0; n],
        error: vec![0.0; n],
        abs: vec![0.0; n],
    };
    for i in 0..n {
        let mut res_k = WGK[10] * fc[i];
        let mut res_g = 0.0;
        let mut res_abs = res_k.abs();
        for j in 0..10 {
            let sum = fv1[j][i] + fv2[j][i];
            res_k += WGK[j] * sum;
            res_abs += WGK[j] * (fv1[j][i].abs() + fv2[j][i].abs());
            if j % 2 == 1 {
                res_g += WG[j / 2] * sum;
            }
        }
        let mean = 0.5 * res_k;
        let mut res_asc = WGK[10] * (fc[i] - mean).abs();
        for j in 0..10 {
            res_asc += WGK[j] * ((fv1[j][i] - mean).abs() + (fv2[j][i] - mean).abs());
        }
        let value = res_k * half;
        let err = (res_k - res_g) * half;
        seg.value[i] = value;
        seg.abs[i] = res_abs * abs_half;
        seg.error[i] = rescale_error(err, res_abs * abs_half, res_asc * abs_half);
        if !value.is_finite() {
            return Err(Error::Quadrature {
                value,
                abs_error: f64::INFINITY,
                segments: 1,
            });
        }
    }
    Ok(seg)
}

/// A converged adaptive partition together with its per-segment estimates.
#[derive(Debug, Clone)]
pub struct Partition {
    pub segments: Vec<Segment>,
    pub components: usize,
}

impl Partition {
    fn sum(&self, pick: impl Fn(&Segment, usize) -> f64) -> Vec<f64> {
        (0..self.components)
            .map(|i| self.segments.iter().map(|s| pick(s, i)).sum())
            .collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.sum(|s, i| s.value[i])
    }

    pub fn errors(&self) -> Vec<f64> {
        self.sum(|s, i| s.error[i])
    }

    pub fn abs_values(&self) -> Vec<f64> {
        self.sum(|s, i| s.abs[i])
    }

    pub fn results(&self) -> Vec<QuadratureResult> {
        let (v, e) = (self.values(), self.errors());
        v.into_iter()
            .zip(e)
            .map(|(value, abs_error_estimate)| QuadratureResult {
                value,
                abs_error_estimate,
                segments_used: self.segments.len(),
            })
            .collect()
    }

    /// Applies the 21-point rule for a different integrand on the same
    /// segments, without further refinement.
    pub fn reintegrate<F>(&self, mut f: F, n: usize) -> Result<Partition>
    where
        F: FnMut(f64, &mut [f64]) -> Result<()>,
    {
        let segments = self
            .segments
            .iter()
            .map(|s| gk21(&mut f, s.a, s.b, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Partition {
            segments,
            components: n,
        })
    }

    fn sort(&mut self) {
        self.segments
            .sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap_or(std::cmp::Ordering::Equal));
    }
}

/// Adapts a partition seeded with `intervals` until every component meets `tol`.
pub fn adaptive<F>(mut f: F, intervals: &[(f64, f64)], n: usize, tol: Tolerance) -> Result<Partition>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let mut segments = intervals
        .iter()
        .filter(|(a, b)| b > a)
        .map(|&(a, b)| gk21(&mut f, a, b, n))
        .collect::<Result<Vec<_>>>()?;
    if segments.is_empty() {
        return Err(Error::Precondition("empty integration range".into()));
    }
    refine(&mut f, &mut segments, n, tol)?;
    let mut p = Partition {
        segments,
        components: n,
    };
    p.sort();
    Ok(p)
}

fn thresholds(segments: &[Segment], n: usize, tol: Tolerance) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let abs: f64 = segments.iter().map(|s| s.abs[i]).sum();
            (tol.rel_tol * abs).max(tol.abs_tol).max(f64::MIN_POSITIVE)
        })
        .collect()
}

fn refine<F>(f: &mut F, segments: &mut Vec<Segment>, n: usize, tol: Tolerance) -> Result<()>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    loop {
        let thr = thresholds(segments, n, tol);
        let converged = (0..n).all(|i| segments.iter().map(|s| s.error[i]).sum::<f64>() <= thr[i]);
        if converged {
            return Ok(());
        }
        if segments.len() >= tol.max_segments {
            let value: f64 = segments.iter().map(|s| s.value[0]).sum();
            let abs_error: f64 = segments.iter().map(|s| s.error[0]).sum();
            return Err(Error::Quadrature {
                value,
                abs_error,
                segments: segments.len(),
            });
        }
        let mut worst = 0;
        let mut worst_score = -1.0;
        for (k, s) in segments.iter().enumerate() {
            let score = (0..n).map(|i| s.error[i] / thr[i]).fold(0.0, f64::max);
            if score > worst_score {
                worst_score = score;
                worst = k;
            }
        }
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            // Segment cannot be split further in floating point.
            return Err(Error::Quadrature {
                value: segments.iter().map(|s| s.value[0]).sum::<f64>() + s.value[0],
                abs_error: s.error[0],
                segments: segments.len() + 1,
            });
        }
        segments.push(gk21(f, s.a, mid, n)?);
        segments.push(gk21(f, mid, s.b, n)?);
    }
}

/// Scalar adaptive integral over a finite interval.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let p = adaptive(
        |x, out: &mut [f64]| {
            out[0] = f(x)?;
            Ok(())
        },
        &[(a, b)],
        1,
        tol,
    )?;
    Ok(p.results()[0])
}

/// Integral over `[a, ∞)` by doubling panels `[a + w(2^k - 1), a + w(2^(k+1) - 1)]`
/// until a panel adds less than `rel_tol` of the running total.
pub fn integrate_to_infinity<F>(mut f: F, a: f64, width: f64, tol: Tolerance) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut total = 0.0;
    let mut err = 0.0;
    let mut segments = 0;
    let mut lo = a;
    let mut w = width;
    for _ in 0..200 {
        let hi = lo + w;
        let r = integrate(&mut f, lo, hi, tol)?;
        total += r.value;
        err += r.abs_error_estimate;
        segments += r.segments_used;
        if r.value.abs() <= tol.rel_tol * total.abs() || (r.value == 0.0 && total != 0.0) {
            return Ok(QuadratureResult {
                value: total,
                abs_error_estimate: err + r.value.abs(),
                segments_used: segments,
            });
        }
        lo = hi;
        w *= 2.0;
        if !lo.is_finite() {
            break;
        }
    }
    Err(Error::Quadrature {
        value: total,
        abs_error: f64::INFINITY,
        segments,
    })
}
