//! Minimal double-double arithmetic.
//!
//! Used only to compute the residual `t - h(x)` at a saddlepoint candidate
//! below one ulp of `h`. All operations are accurate to a few units of 2^-104
//! relative; `exp` loses at most ten more bits to its squaring steps.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

impl Dd {
    pub const fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn recip(self) -> Self {
        Dd::new(1.0) / self
    }

    fn scale(self, f: f64) -> Self {
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    /// `x = k ln 2 + r`, `e^r` by Taylor series at `r / 2^10` followed by
    /// ten squarings of `1 + e` kept as `e(2 + e)`.
    pub fn exp(self) -> Self {
        if self.hi > 709.8 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.2 {
            return Dd::new(0.0);
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Dd::new(k)).scale(1.0 / 1024.0);
        let mut term = r;
        let mut em1 = r;
        let mut n = 1.0;
        while term.hi.abs() > 1e-36 * em1.hi.abs().max(1e-300) {
            n += 1.0;
            term = term * r / Dd::new(n);
            em1 = em1 + term;
        }
        for _ in 0..10 {
            em1 = em1 * (em1 + Dd::new(2.0));
        }
        let y = em1 + Dd::new(1.0);
        // 2^k in two steps so that neither factor overflows
        let k = k as i32;
        let half = k / 2;
        y.scale(2f64.powi(half)).scale(2f64.powi(k - half))
    }

    /// One Newton step `y + x e^{-y} - 1` from the libm logarithm.
    pub fn ln(self) -> Self {
        let y = Dd::new(self.hi.ln());
        y + self * (-y).exp() - Dd::new(1.0)
    }

    pub fn powi(self, n: i32) -> Self {
        let mut result = Dd::new(1.0);
        let mut base = self;
        let mut m = n.unsigned_abs();
        while m > 0 {
            if m & 1 == 1 {
                result = result * base;
            }
            m >>= 1;
            if m > 0 {
                base = base * base;
            }
        }
        if n < 0 {
            result.recip()
        } else {
            result
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, rhs: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::renorm(s, e + f)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        Dd::renorm(p, e)
    }
}

impl std::ops::Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Dd::new(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Dd::new(q2);
        let q3 = r.hi / rhs.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Dd { hi: q1, lo: q2 } + Dd::new(q3)
    }
}
