//! Single-variable expression trees and their evaluators.
//!
//! One tree walker drives four algebras: plain `f64` values, [`Jet4`]
//! derivatives, second-order increments (used to form `K(x,t) - K(x̂,t)`
//! without cancellation) and double-double slopes (used for sub-ulp
//! saddlepoint residuals).

use std::fmt;

use super::dd::Dd;
use super::jet::Jet4;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

/// An evaluation domain for expression trees.
pub(crate) trait Algebra {
    type V: Clone;
    fn point(&self) -> f64;
    fn constant(&self, c: f64) -> Self::V;
    fn var(&self) -> Self::V;
    fn neg(&self, a: Self::V) -> Self::V;
    fn add(&self, a: Self::V, b: Self::V) -> Self::V;
    fn sub(&self, a: Self::V, b: Self::V) -> Self::V;
    fn mul(&self, a: Self::V, b: Self::V) -> Self::V;
    fn div(&self, a: Self::V, b: Self::V) -> Result<Self::V>;
    fn pow(&self, a: Self::V, p: f64) -> Result<Self::V>;
    fn exp(&self, a: Self::V) -> Result<Self::V>;
    fn ln(&self, a: Self::V) -> Result<Self::V>;

    fn domain(&self, op: &'static str) -> Error {
        Error::Domain { op, x: self.point() }
    }

    fn overflow(&self, op: &'static str) -> Error {
        Error::Overflow { op, x: self.point() }
    }
}

fn integer_exponent(p: f64) -> Option<i32> {
    if p.fract() == 0.0 && p.abs() <= 64.0 {
        Some(p as i32)
    } else {
        None
    }
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var() -> Self {
        Expr::Var
    }

    pub fn pow(self, p: f64) -> Self {
        Expr::Pow(Box::new(self), p)
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn ln(self) -> Self {
        Expr::Log(Box::new(self))
    }

    pub(crate) fn walk<A: Algebra>(&self, alg: &A) -> Result<A::V> {
        Ok(match self {
            Expr::Const(c) => alg.constant(*c),
            Expr::Var => alg.var(),
            Expr::Neg(a) => {
                let a = a.walk(alg)?;
                alg.neg(a)
            }
            Expr::Add(a, b) => {
                let (a, b) = (a.walk(alg)?, b.walk(alg)?);
                alg.add(a, b)
            }
            Expr::Sub(a, b) => {
                let (a, b) = (a.walk(alg)?, b.walk(alg)?);
                alg.sub(a, b)
            }
            Expr::Mul(a, b) => {
                let (a, b) = (a.walk(alg)?, b.walk(alg)?);
                alg.mul(a, b)
            }
            Expr::Div(a, b) => {
                let (a, b) = (a.walk(alg)?, b.walk(alg)?);
                alg.div(a, b)?
            }
            Expr::Pow(a, p) => {
                let a = a.walk(alg)?;
                alg.pow(a, *p)?
            }
            Expr::Exp(a) => {
                let a = a.walk(alg)?;
                alg.exp(a)?
            }
            Expr::Log(a) => {
                let a = a.walk(alg)?;
                alg.ln(a)?
            }
        })
    }

    /// Value at `x`. Domain violations and overflow are errors.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.walk(&Plain(x))
    }

    /// Value and first four derivatives at `x`.
    pub fn eval_jet(&self, x: f64) -> Result<Jet4> {
        self.walk(&JetAlgebra(x))
    }

    /// Second-order increment of the expression between `x0` and `x0 + u`.
    pub(crate) fn increment(&self, x0: f64, u: f64) -> Result<Increment> {
        self.walk(&IncrementAlgebra { x0, u })
    }

    /// Value and first derivative at `x` in double-double precision.
    pub(crate) fn slope_dd(&self, x: f64) -> Result<(Dd, Dd)> {
        self.walk(&DdAlgebra(x))
    }

    /// True when the expression does not depend on `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var => false,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.is_constant() && b.is_constant(),
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

fn fmt_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // `{}` on f64 is the shortest round-trip decimal without exponent.
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        write!(f, "(-{})", -c)
    } else {
        write!(f, "{c}")
    }
}

/// Fully parenthesized printer whose output parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_number(f, *c),
            Expr::Var => write!(f, "x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, p) => {
                write!(f, "({a}^")?;
                if *p < 0.0 {
                    write!(f, "-{}", -p)?;
                } else {
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
        }
    }
}

struct Plain(f64);

impl Algebra for Plain {
    type V = f64;
    fn point(&self) -> f64 {
        self.0
    }
    fn constant(&self, c: f64) -> f64 {
        c
    }
    fn var(&self) -> f64 {
        self.0
    }
    fn neg(&self, a: f64) -> f64 {
        -a
    }
    fn add(&self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn div(&self, a: f64, b: f64) -> Result<f64> {
        if b == 0.0 {
            return Err(self.domain("division by zero"));
        }
        let r = a / b;
        if r.is_finite() {
            Ok(r)
        } else {
            Err(self.overflow("division"))
        }
    }
    fn pow(&self, a: f64, p: f64) -> Result<f64> {
        let r = match integer_exponent(p) {
            Some(n) => {
                if a == 0.0 && n < 0 {
                    return Err(self.domain("power of zero"));
                }
                a.powi(n)
            }
            None => {
                if a < 0.0 || (a == 0.0 && p < 0.0) {
                    return Err(self.domain("power"));
                }
                a.powf(p)
            }
        };
        if r.is_finite() {
            Ok(r)
        } else {
            Err(self.overflow("power"))
        }
    }
    fn exp(&self, a: f64) -> Result<f64> {
        let r = a.exp();
        if r.is_finite() {
            Ok(r)
        } else {
            Err(self.overflow("exp"))
        }
    }
    fn ln(&self, a: f64) -> Result<f64> {
        if a > 0.0 {
            Ok(a.ln())
        } else {
            Err(self.domain("log"))
        }
    }
}

struct JetAlgebra(f64);

impl JetAlgebra {
    fn check(&self, j: Jet4, op: &'static str) -> Result<Jet4> {
        if j.is_finite() {
            Ok(j)
        } else {
            Err(self.overflow(op))
        }
    }
}

impl Algebra for JetAlgebra {
    type V = Jet4;
    fn point(&self) -> f64 {
        self.0
    }
    fn constant(&self, c: f64) -> Jet4 {
        Jet4::constant(c)
    }
    fn var(&self) -> Jet4 {
        Jet4::variable(self.0)
    }
    fn neg(&self, a: Jet4) -> Jet4 {
        -a
    }
    fn add(&self, a: Jet4, b: Jet4) -> Jet4 {
        a + b
    }
    fn sub(&self, a: Jet4, b: Jet4) -> Jet4 {
        a - b
    }
    fn mul(&self, a: Jet4, b: Jet4) -> Jet4 {
        a * b
    }
    fn div(&self, a: Jet4, b: Jet4) -> Result<Jet4> {
        if b.value() == 0.0 {
            return Err(self.domain("division by zero"));
        }
        self.check(a.div_unchecked(b), "division")
    }
    fn pow(&self, a: Jet4, p: f64) -> Result<Jet4> {
        let r = match integer_exponent(p) {
            Some(n) if n >= 0 => a.powi_nonneg(n as u32),
            Some(n) => {
                if a.value() == 0.0 {
                    return Err(self.domain("power of zero"));
                }
                Jet4::constant(1.0).div_unchecked(a.powi_nonneg((-n) as u32))
            }
            None => {
                if a.value() <= 0.0 {
                    return Err(self.domain("power"));
                }
                a.powf_unchecked(p)
            }
        };
        self.check(r, "power")
    }
    fn exp(&self, a: Jet4) -> Result<Jet4> {
        self.check(a.exp(), "exp")
    }
    fn ln(&self, a: Jet4) -> Result<Jet4> {
        if a.value() <= 0.0 {
            return Err(self.domain("log"));
        }
        self.check(a.ln_unchecked(), "log")
    }
}

/// `f` at `x0` (value `v`, slope `d`) together with the second-order
/// remainder `r = f(x0 + u) - v - d*u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Increment {
    pub v: f64,
    pub d: f64,
    pub r: f64,
}

impl Increment {
    pub fn full(&self, u: f64) -> f64 {
        self.v + self.d * u + self.r
    }
}

/// `e^z - 1 - z` without cancellation.
pub(crate) fn exp_m1_mz(z: f64) -> f64 {
    if z.abs() < 0.5 {
        let mut term = z * z / 2.0;
        let mut sum = term;
        let mut n = 2.0;
        while term.abs() > 1e-17 * sum.abs() {
            n += 1.0;
            term *= z / n;
            sum += term;
        }
        sum
    } else {
        z.exp_m1() - z
    }
}

/// `ln(1 + z) - z` without cancellation, for `z > -1`.
pub(crate) fn ln_1p_mz(z: f64) -> f64 {
    if z.abs() < 0.25 {
        // -z^2/2 + z^3/3 - ...
        let mut pw = z * z;
        let mut sum = -pw / 2.0;
        let mut n = 2.0;
        loop {
            n += 1.0;
            pw *= -z;
            let term = -pw / n;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        z.ln_1p() - z
    }
}

/// `(1 + z)^p - 1 - p z` without cancellation.
fn pow_1p_mz(z: f64, p: f64) -> f64 {
    if z.abs() < 0.25 {
        let mut coef = p * (p - 1.0) / 2.0;
        let mut pw = z * z;
        let mut sum = coef * pw;
        let mut n = 2.0;
        loop {
            coef *= (p - n) / (n + 1.0);
            n += 1.0;
            pw *= z;
            let term = coef * pw;
            sum += term;
            if coef == 0.0 || term.abs() <= 1e-17 * sum.abs() || n > 200.0 {
                break;
            }
        }
        sum
    } else if 1.0 + z > 0.0 {
        (p * z.ln_1p()).exp_m1() - p * z
    } else {
        (1.0 + z).powi(p as i32) - 1.0 - p * z
    }
}

struct IncrementAlgebra {
    x0: f64,
    u: f64,
}

impl IncrementAlgebra {
    fn check(&self, i: Increment, op: &'static str) -> Result<Increment> {
        if i.v.is_finite() && i.d.is_finite() && i.r.is_finite() {
            Ok(i)
        } else {
            Err(self.overflow(op))
        }
    }
}

impl Algebra for IncrementAlgebra {
    type V = Increment;
    fn point(&self) -> f64 {
        self.x0 + self.u
    }
    fn constant(&self, c: f64) -> Increment {
        Increment { v: c, d: 0.0, r: 0.0 }
    }
    fn var(&self) -> Increment {
        Increment {
            v: self.x0,
            d: 1.0,
            r: 0.0,
        }
    }
    fn neg(&self, a: Increment) -> Increment {
        Increment {
            v: -a.v,
            d: -a.d,
            r: -a.r,
        }
    }
    fn add(&self, a: Increment, b: Increment) -> Increment {
        Increment {
            v: a.v + b.v,
            d: a.d + b.d,
            r: a.r + b.r,
        }
    }
    fn sub(&self, a: Increment, b: Increment) -> Increment {
        Increment {
            v: a.v - b.v,
            d: a.d - b.d,
            r: a.r - b.r,
        }
    }
    fn mul(&self, a: Increment, b: Increment) -> Increment {
        let u = self.u;
        let (du_a, du_b) = (a.d * u, b.d * u);
        Increment {
            v: a.v * b.v,
            d: a.v * b.d + a.d * b.v,
            r: du_a * du_b + a.v * b.r + b.v * a.r + du_a * b.r + du_b * a.r + a.r * b.r,
        }
    }
    fn div(&self, a: Increment, b: Increment) -> Result<Increment> {
        if b.v == 0.0 || b.full(self.u) == 0.0 {
            return Err(self.domain("division by zero"));
        }
        let inv = self.pow(b, -1.0)?;
        self.check(self.mul(a, inv), "division")
    }
    fn pow(&self, a: Increment, p: f64) -> Result<Increment> {
        let integer = integer_exponent(p);
        let delta = a.d * self.u + a.r;
        if a.v == 0.0 {
            // f(x0) = 0: only powers with a vanishing slope at x0 are representable.
            return match integer {
                Some(1) => Ok(a),
                Some(0) => Ok(self.constant(1.0)),
                Some(n) if n >= 2 => Ok(Increment {
                    v: 0.0,
                    d: 0.0,
                    r: delta.powi(n),
                }),
                _ if p > 1.0 && delta >= 0.0 => Ok(Increment {
                    v: 0.0,
                    d: 0.0,
                    r: delta.powf(p),
                }),
                _ => Err(self.domain("power of zero")),
            };
        }
        let z = delta / a.v;
        if integer.is_none() && (a.v < 0.0 || 1.0 + z <= 0.0) {
            return Err(self.domain("power"));
        }
        if integer.is_some_and(|n| n < 0) && 1.0 + z == 0.0 {
            return Err(self.domain("power of zero"));
        }
        let base = match integer {
            Some(n) => a.v.powi(n),
            None => a.v.powf(p),
        };
        let slope = p * base / a.v;
        let out = Increment {
            v: base,
            d: slope * a.d,
            r: base * pow_1p_mz(z, p) + slope * a.r,
        };
        self.check(out, "power")
    }
    fn exp(&self, a: Increment) -> Result<Increment> {
        let e0 = a.v.exp();
        let z = a.d * self.u + a.r;
        let out = Increment {
            v: e0,
            d: e0 * a.d,
            r: e0 * (exp_m1_mz(z) + a.r),
        };
        self.check(out, "exp")
    }
    fn ln(&self, a: Increment) -> Result<Increment> {
        if a.v <= 0.0 {
            return Err(self.domain("log"));
        }
        let z = (a.d * self.u + a.r) / a.v;
        if 1.0 + z <= 0.0 {
            return Err(self.domain("log"));
        }
        let out = Increment {
            v: a.v.ln(),
            d: a.d / a.v,
            r: ln_1p_mz(z) + a.r / a.v,
        };
        self.check(out, "log")
    }
}

struct DdAlgebra(f64);

impl Algebra for DdAlgebra {
    type V = (Dd, Dd);
    fn point(&self) -> f64 {
        self.0
    }
    fn constant(&self, c: f64) -> (Dd, Dd) {
        (Dd::new(c), Dd::new(0.0))
    }
    fn var(&self) -> (Dd, Dd) {
        (Dd::new(self.0), Dd::new(1.0))
    }
    fn neg(&self, a: (Dd, Dd)) -> (Dd, Dd) {
        (-a.0, -a.1)
    }
    fn add(&self, a: (Dd, Dd), b: (Dd, Dd)) -> (Dd, Dd) {
        (a.0 + b.0, a.1 + b.1)
    }
    fn sub(&self, a: (Dd, Dd), b: (Dd, Dd)) -> (Dd, Dd) {
        (a.0 - b.0, a.1 - b.1)
    }
    fn mul(&self, a: (Dd, Dd), b: (Dd, Dd)) -> (Dd, Dd) {
        (a.0 * b.0, a.0 * b.1 + a.1 * b.0)
    }
    fn div(&self, a: (Dd, Dd), b: (Dd, Dd)) -> Result<(Dd, Dd)> {
        if b.0.hi == 0.0 {
            return Err(self.domain("division by zero"));
        }
        let q = a.0 / b.0;
        let d = (a.1 - q * b.1) / b.0;
        Ok((q, d))
    }
    fn pow(&self, a: (Dd, Dd), p: f64) -> Result<(Dd, Dd)> {
        let value = match integer_exponent(p) {
            Some(n) if n >= 0 => a.0.powi(n),
            Some(n) => {
                if a.0.hi == 0.0 {
                    return Err(self.domain("power of zero"));
                }
                a.0.powi(n)
            }
            None => {
                if a.0.hi <= 0.0 {
                    return Err(self.domain("power"));
                }
                (Dd::new(p) * a.0.ln()).exp()
            }
        };
        let slope = match integer_exponent(p) {
            Some(0) => Dd::new(0.0),
            Some(n) => Dd::new(p) * a.0.powi(n - 1) * a.1,
            None => Dd::new(p) * value / a.0 * a.1,
        };
        if value.is_finite() && slope.is_finite() {
            Ok((value, slope))
        } else {
            Err(self.overflow("power"))
        }
    }
    fn exp(&self, a: (Dd, Dd)) -> Result<(Dd, Dd)> {
        let e = a.0.exp();
        if !e.is_finite() {
            return Err(self.overflow("exp"));
        }
        Ok((e, e * a.1))
    }
    fn ln(&self, a: (Dd, Dd)) -> Result<(Dd, Dd)> {
        if a.0.hi <= 0.0 {
            return Err(self.domain("log"));
        }
        Ok((a.0.ln(), a.1 / a.0))
    }
}
