//! Scalar functions of time: the masses, frequencies, drives and coupling of
//! the oscillator pair.
//!
//! A [`TimeFunction`] is an immutable expression tree. Every node provides
//! its value and first two time derivatives through [`Jet`] arithmetic, so
//! derivatives of composite expressions are exact (analytic) for parametric
//! nodes. Tabulated data carries finite-difference derivatives.

mod jet;
mod parse;
pub(crate) mod table;

use std::fmt;

pub use jet::Jet;
pub use parse::parse;
pub use table::Table;

use crate::error::{Error, Result};

/// Number of points used when validating a function on an interval.
pub const VALIDATION_POINTS: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub enum TimeFunction {
    Constant(f64),
    /// `amplitude · exp(rate · t)`
    Exponential { amplitude: f64, rate: f64 },
    /// Coefficients in ascending powers of t.
    Polynomial(Vec<f64>),
    /// `amplitude · sin(frequency · t + phase)`
    Sinusoid { amplitude: f64, frequency: f64, phase: f64 },
    Tabulated(Table),
    Sum(Box<TimeFunction>, Box<TimeFunction>),
    Product(Box<TimeFunction>, Box<TimeFunction>),
    Scale(f64, Box<TimeFunction>),
    Quotient(Box<TimeFunction>, Box<TimeFunction>),
    Power(Box<TimeFunction>, f64),
    Exp(Box<TimeFunction>),
    Sin(Box<TimeFunction>),
    Cos(Box<TimeFunction>),
}

impl Default for TimeFunction {
    fn default() -> Self {
        TimeFunction::Constant(0.0)
    }
}

impl From<f64> for TimeFunction {
    fn from(c: f64) -> Self {
        TimeFunction::Constant(c)
    }
}

impl std::str::FromStr for TimeFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

fn trim_poly(mut c: Vec<f64>) -> TimeFunction {
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    match c.len() {
        0 => TimeFunction::Constant(0.0),
        1 => TimeFunction::Constant(c[0]),
        _ => TimeFunction::Polynomial(c),
    }
}

fn poly_coeffs(f: &TimeFunction) -> Option<Vec<f64>> {
    match f {
        TimeFunction::Constant(c) => Some(vec![*c]),
        TimeFunction::Polynomial(c) => Some(c.clone()),
        _ => None,
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `(offset, slope)` when `f` is affine in t.
fn affine(f: &TimeFunction) -> Option<(f64, f64)> {
    match f {
        TimeFunction::Polynomial(c) if c.len() == 2 => Some((c[0], c[1])),
        _ => None,
    }
}

// Smart constructors. They fold constants and recognise the parametric
// families so that parsed expressions land on the specialised nodes.
impl TimeFunction {
    pub fn t() -> Self {
        TimeFunction::Polynomial(vec![0.0, 1.0])
    }

    pub fn exponential(amplitude: f64, rate: f64) -> Self {
        TimeFunction::Exponential { amplitude, rate }
    }

    pub fn sinusoid(amplitude: f64, frequency: f64, phase: f64) -> Self {
        TimeFunction::Sinusoid { amplitude, frequency, phase }
    }

    pub fn scale(c: f64, f: TimeFunction) -> Self {
        use TimeFunction::*;
        match f {
            _ if c == 1.0 => f,
            Constant(k) => Constant(c * k),
            Polynomial(p) => trim_poly(p.into_iter().map(|x| c * x).collect()),
            Sinusoid { amplitude, frequency, phase } => Sinusoid {
                amplitude: c * amplitude,
                frequency,
                phase,
            },
            Scale(d, g) => Self::scale(c * d, *g),
            other => Scale(c, Box::new(other)),
        }
    }

    pub fn add(a: TimeFunction, b: TimeFunction) -> Self {
        use TimeFunction::*;
        match (poly_coeffs(&a), poly_coeffs(&b)) {
            (Some(p), Some(q)) => {
                let mut c = vec![0.0; p.len().max(q.len())];
                for (i, x) in p.iter().enumerate() {
                    c[i] += x;
                }
                for (i, x) in q.iter().enumerate() {
                    c[i] += x;
                }
                trim_poly(c)
            }
            _ => Sum(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: TimeFunction, b: TimeFunction) -> Self {
        Self::add(a, Self::scale(-1.0, b))
    }

    pub fn mul(a: TimeFunction, b: TimeFunction) -> Self {
        use TimeFunction::*;
        match (a, b) {
            (Constant(c), f) | (f, Constant(c)) => Self::scale(c, f),
            (Polynomial(p), Polynomial(q)) => trim_poly(poly_mul(&p, &q)),
            (a, b) => Product(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: TimeFunction, b: TimeFunction) -> Self {
        match b {
            TimeFunction::Constant(c) => Self::scale(1.0 / c, a),
            b => TimeFunction::Quotient(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(base: TimeFunction, n: f64) -> Self {
        use TimeFunction::*;
        if n == 1.0 {
            return base;
        }
        match base {
            Constant(c) => Constant(c.powf(n)),
            Polynomial(p) if n >= 0.0 && n.fract() == 0.0 && n <= 16.0 => {
                let mut acc = vec![1.0];
                for _ in 0..n as usize {
                    acc = poly_mul(&acc, &p);
                }
                trim_poly(acc)
            }
            b => Power(Box::new(b), n),
        }
    }

    pub fn exp(arg: TimeFunction) -> Self {
        use TimeFunction::*;
        if let Constant(c) = arg {
            return Constant(c.exp());
        }
        if let Some((b, a)) = affine(&arg) {
            return Exponential {
                amplitude: b.exp(),
                rate: a,
            };
        }
        Exp(Box::new(arg))
    }

    pub fn sin(arg: TimeFunction) -> Self {
        use TimeFunction::*;
        if let Constant(c) = arg {
            return Constant(c.sin());
        }
        if let Some((b, a)) = affine(&arg) {
            return Self::sinusoid(1.0, a, b);
        }
        Sin(Box::new(arg))
    }

    pub fn cos(arg: TimeFunction) -> Self {
        use TimeFunction::*;
        if let Constant(c) = arg {
            return Constant(c.cos());
        }
        if let Some((b, a)) = affine(&arg) {
            return Self::sinusoid(1.0, a, b + std::f64::consts::FRAC_PI_2);
        }
        Cos(Box::new(arg))
    }
}

impl TimeFunction {
    /// Value and two derivatives at `t`, without domain checks. Tabulated
    /// nodes extrapolate their end intervals.
    pub fn jet(&self, t: f64) -> Jet {
        use TimeFunction::*;
        match self {
            Constant(c) => Jet::constant(*c),
            Exponential { amplitude, rate } => {
                let v = amplitude * (rate * t).exp();
                Jet::new(v, rate * v, rate * rate * v)
            }
            Polynomial(c) => {
                let (mut p0, mut p1, mut p2) = (0.0, 0.0, 0.0);
                for &a in c.iter().rev() {
                    p2 = p2 * t + 2.0 * p1;
                    p1 = p1 * t + p0;
                    p0 = p0 * t + a;
                }
                Jet::new(p0, p1, p2)
            }
            Sinusoid { amplitude, frequency, phase } => {
                let (s, c) = (frequency * t + phase).sin_cos();
                Jet::new(
                    amplitude * s,
                    amplitude * frequency * c,
                    -amplitude * frequency * frequency * s,
                )
            }
            Tabulated(table) => table.jet(t),
            Sum(a, b) => a.jet(t) + b.jet(t),
            Product(a, b) => a.jet(t) * b.jet(t),
            Scale(c, f) => f.jet(t).scale(*c),
            Quotient(a, b) => a.jet(t).div(b.jet(t)),
            Power(b, n) => b.jet(t).powf(*n),
            Exp(f) => f.jet(t).exp(),
            Sin(f) => f.jet(t).sin(),
            Cos(f) => f.jet(t).cos(),
        }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant(c) => *c,
            f => f.jet(t).value,
        }
    }

    /// Interval on which the function is defined; `None` means all of ℝ.
    pub fn domain(&self) -> Option<(f64, f64)> {
        use TimeFunction::*;
        let meet = |a: Option<(f64, f64)>, b: Option<(f64, f64)>| match (a, b) {
            (None, x) | (x, None) => x,
            (Some((a0, a1)), Some((b0, b1))) => Some((a0.max(b0), a1.min(b1))),
        };
        match self {
            Tabulated(t) => Some(t.domain()),
            Sum(a, b) | Product(a, b) | Quotient(a, b) => meet(a.domain(), b.domain()),
            Scale(_, f) | Power(f, _) | Exp(f) | Sin(f) | Cos(f) => f.domain(),
            _ => None,
        }
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        match self.domain() {
            Some((start, end)) if !(t >= start && t <= end) => Err(Error::OutOfDomain { t, start, end }),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.jet(t).value)
    }

    pub fn deriv1(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.jet(t).d1)
    }

    pub fn deriv2(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.jet(t).d2)
    }

    /// Check the function on [start, end]: inside its domain, finite with
    /// finite derivatives on a uniform sampling grid, and every divisor keeps
    /// a strict sign.
    pub fn validate(&self, start: f64, end: f64) -> Result<()> {
        self.check_domain(start)?;
        self.check_domain(end)?;
        let grid = sample_grid(start, end, VALIDATION_POINTS);
        self.check_divisors(&grid)?;
        for &t in &grid {
            let j = self.jet(t);
            if !j.is_finite() {
                return Err(Error::InvalidSpec(format!("`{self}` is not finite (or not C²) at t = {t}")));
            }
        }
        Ok(())
    }

    fn check_divisors(&self, grid: &[f64]) -> Result<()> {
        use TimeFunction::*;
        match self {
            Quotient(a, b) => {
                a.check_divisors(grid)?;
                b.check_divisors(grid)?;
                if !keeps_sign(grid.iter().map(|&t| b.value(t))) {
                    return Err(Error::InvalidSpec(format!("divisor `{b}` vanishes or changes sign")));
                }
                Ok(())
            }
            Sum(a, b) | Product(a, b) => {
                a.check_divisors(grid)?;
                b.check_divisors(grid)
            }
            Scale(_, f) | Power(f, _) | Exp(f) | Sin(f) | Cos(f) => f.check_divisors(grid),
            _ => Ok(()),
        }
    }

    /// True when every sample on the validation grid is strictly positive.
    pub fn is_positive_on(&self, start: f64, end: f64) -> bool {
        sample_grid(start, end, VALIDATION_POINTS).into_iter().all(|t| self.value(t) > 0.0)
    }

    /// True when the function is identically zero (structurally or on the
    /// validation grid).
    pub fn vanishes_on(&self, start: f64, end: f64) -> bool {
        match self {
            TimeFunction::Constant(c) => *c == 0.0,
            f => sample_grid(start, end, VALIDATION_POINTS).into_iter().all(|t| f.value(t) == 0.0),
        }
    }
}

fn keeps_sign(values: impl Iterator<Item = f64>) -> bool {
    let mut sign = 0.0;
    for v in values {
        if !(v != 0.0) || !v.is_finite() {
            return false;
        }
        if sign == 0.0 {
            sign = v.signum();
        } else if v.signum() != sign {
            return false;
        }
    }
    true
}

/// `n` uniformly spaced points on [start, end], endpoints included.
pub fn sample_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                end
            } else {
                start + (end - start) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn fmt_num(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
        write!(f, "(-{:?})", -x)
    } else {
        write!(f, "{x:?}")
    }
}

/// Prints in the expression grammar, so `parse(f.to_string())` rebuilds an
/// equivalent function. Tabulated nodes print as an opaque `table(..)`
/// marker, which does not parse.
impl fmt::Display for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TimeFunction::*;
        match self {
            Constant(c) => fmt_num(f, *c),
            Exponential { amplitude, rate } => {
                fmt_num(f, *amplitude)?;
                f.write_str("*exp(")?;
                fmt_num(f, *rate)?;
                f.write_str("*t)")
            }
            Polynomial(c) => {
                f.write_str("(")?;
                for (k, a) in c.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" + ")?;
                    }
                    fmt_num(f, *a)?;
                    match k {
                        0 => {}
                        1 => f.write_str("*t")?,
                        _ => write!(f, "*t^{k}")?,
                    }
                }
                f.write_str(")")
            }
            Sinusoid { amplitude, frequency, phase } => {
                fmt_num(f, *amplitude)?;
                f.write_str("*sin(")?;
                fmt_num(f, *frequency)?;
                f.write_str("*t + ")?;
                fmt_num(f, *phase)?;
                f.write_str(")")
            }
            Tabulated(t) => write!(f, "table({} samples)", t.len()),
            Sum(a, b) => write!(f, "(({a}) + ({b}))"),
            Product(a, b) => write!(f, "(({a}) * ({b}))"),
            Scale(c, g) => {
                fmt_num(f, *c)?;
                write!(f, "*({g})")
            }
            Quotient(a, b) => write!(f, "(({a}) / ({b}))"),
            Power(b, n) => write!(f, "({b})^{n:?}"),
            Exp(g) => write!(f, "exp({g})"),
            Sin(g) => write!(f, "sin({g})"),
            Cos(g) => write!(f, "cos({g})"),
        }
    }
}
