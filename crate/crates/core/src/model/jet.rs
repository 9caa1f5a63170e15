//! Fourth-order truncated Taylor arithmetic.
//!
//! A [`Jet4`] carries a function value together with its first four
//! derivatives at a point. Internally the coefficients are stored in
//! normalized Taylor form `c_k = f^(k)(x) / k!`, which keeps the product and
//! composition recurrences free of binomial factors.

use std::ops::{Add, Mul, Neg, Sub};

pub const ORDER: usize = 4;

const FACT: [f64; ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet4 {
    coeffs: [f64; ORDER + 1],
}

impl Jet4 {
    pub fn constant(c: f64) -> Self {
        let mut coeffs = [0.0; ORDER + 1];
        coeffs[0] = c;
        Jet4 { coeffs }
    }

    /// The identity function seeded at `x`.
    pub fn variable(x: f64) -> Self {
        let mut coeffs = [0.0; ORDER + 1];
        coeffs[0] = x;
        coeffs[1] = 1.0;
        Jet4 { coeffs }
    }

    /// Builds a jet from the value and derivatives `[f, f', f'', f''', f'''']`.
    pub fn from_derivatives(d: [f64; ORDER + 1]) -> Self {
        let mut coeffs = [0.0; ORDER + 1];
        for k in 0..=ORDER {
            coeffs[k] = d[k] / FACT[k];
        }
        Jet4 { coeffs }
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Derivative of order `k` (0 returns the value).
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeffs[k] * FACT[k]
    }

    pub fn derivatives(&self) -> [f64; ORDER + 1] {
        let mut d = [0.0; ORDER + 1];
        for (k, v) in d.iter_mut().enumerate() {
            *v = self.derivative(k);
        }
        d
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub(crate) fn scale(self, s: f64) -> Self {
        let mut coeffs = self.coeffs;
        for c in coeffs.iter_mut() {
            *c *= s;
        }
        Jet4 { coeffs }
    }

    /// Quotient; the caller guarantees a nonzero denominator value.
    pub(crate) fn div_unchecked(self, rhs: Self) -> Self {
        let (a, b) = (&self.coeffs, &rhs.coeffs);
        let mut c = [0.0; ORDER + 1];
        for k in 0..=ORDER {
            let mut acc = a[k];
            for j in 1..=k {
                acc -= b[j] * c[k - j];
            }
            c[k] = acc / b[0];
        }
        Jet4 { coeffs: c }
    }

    pub(crate) fn exp(self) -> Self {
        let a = &self.coeffs;
        let mut b = [0.0; ORDER + 1];
        b[0] = a[0].exp();
        for k in 1..=ORDER {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * a[j] * b[k - j];
            }
            b[k] = acc / k as f64;
        }
        Jet4 { coeffs: b }
    }

    /// Natural logarithm; the caller guarantees a positive value.
    pub(crate) fn ln_unchecked(self) -> Self {
        let a = &self.coeffs;
        let mut b = [0.0; ORDER + 1];
        b[0] = a[0].ln();
        for k in 1..=ORDER {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * b[j] * a[k - j];
            }
            b[k] = (a[k] - acc / k as f64) / a[0];
        }
        Jet4 { coeffs: b }
    }

    /// Real power through the standard power recurrence; requires a nonzero value.
    pub(crate) fn powf_unchecked(self, p: f64) -> Self {
        let a = &self.coeffs;
        let mut b = [0.0; ORDER + 1];
        b[0] = a[0].powf(p);
        for k in 1..=ORDER {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += ((p + 1.0) * j as f64 - k as f64) * a[j] * b[k - j];
            }
            b[k] = acc / (k as f64 * a[0]);
        }
        Jet4 { coeffs: b }
    }

    /// Nonnegative integer power by repeated squaring; valid at any value.
    pub(crate) fn powi_nonneg(self, n: u32) -> Self {
        let mut result = Jet4::constant(1.0);
        let mut base = self;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result * base;
            }
            n >>= 1;
            if n > 0 {
                base = base * base;
            }
        }
        result
    }
}

impl Add for Jet4 {
    type Output = Jet4;
    fn add(self, rhs: Jet4) -> Jet4 {
        let mut coeffs = self.coeffs;
        for (c, r) in coeffs.iter_mut().zip(rhs.coeffs) {
            *c += r;
        }
        Jet4 { coeffs }
    }
}

impl Sub for Jet4 {
    type Output = Jet4;
    fn sub(self, rhs: Jet4) -> Jet4 {
        let mut coeffs = self.coeffs;
        for (c, r) in coeffs.iter_mut().zip(rhs.coeffs) {
            *c -= r;
        }
        Jet4 { coeffs }
    }
}

impl Neg for Jet4 {
    type Output = Jet4;
    fn neg(self) -> Jet4 {
        self.scale(-1.0)
    }
}

impl Mul for Jet4 {
    type Output = Jet4;
    fn mul(self, rhs: Jet4) -> Jet4 {
        let (a, b) = (&self.coeffs, &rhs.coeffs);
        let mut c = [0.0; ORDER + 1];
        for k in 0..=ORDER {
            for j in 0..=k {
                c[k] += a[j] * b[k - j];
            }
        }
        Jet4 { coeffs: c }
    }
}
