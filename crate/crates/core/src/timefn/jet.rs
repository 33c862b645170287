use std::ops::{Add, Mul, Neg, Sub};

/// Value together with its first and second time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const fn new(value: f64, d1: f64, d2: f64) -> Self {
        Self { value, d1, d2 }
    }

    pub const fn constant(value: f64) -> Self {
        Self::new(value, 0.0, 0.0)
    }

    pub fn scale(self, c: f64) -> Self {
        Self::new(c * self.value, c * self.d1, c * self.d2)
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.value;
        let r1 = -self.d1 * r * r;
        let r2 = (2.0 * self.d1 * self.d1 * r - self.d2) * r * r;
        Self::new(r, r1, r2)
    }

    pub fn div(self, other: Self) -> Self {
        let q = self.value / other.value;
        let q1 = (self.d1 - q * other.d1) / other.value;
        let q2 = (self.d2 - 2.0 * q1 * other.d1 - q * other.d2) / other.value;
        Self::new(q, q1, q2)
    }

    /// Compose an outer function given by its value and two derivatives at
    /// `self.value`.
    pub fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        Self::new(f, df * self.d1, ddf * self.d1 * self.d1 + df * self.d2)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.value))
    }

    pub fn powf(self, n: f64) -> Self {
        let b = self.value;
        if n == 0.0 {
            return Self::constant(1.0);
        }
        if n == 1.0 {
            return self;
        }
        let f = b.powf(n);
        let df = n * b.powf(n - 1.0);
        let ddf = if n == 2.0 { 2.0 } else { n * (n - 1.0) * b.powf(n - 2.0) };
        self.chain(f, df, ddf)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet::new(
            self.value * o.value,
            self.d1 * o.value + self.value * o.d1,
            self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        )
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
