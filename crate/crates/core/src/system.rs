//! The coupled oscillator pair and its reduction to independent normal modes.
//!
//! Lab coordinates are mass-scaled (`y_j = √m_j x_j`) and rotated by a
//! constant angle α:
//!
//! ```text
//! Q₁ = √m₁ x₁ cos α − √m₂ x₂ sin α
//! Q₂ = √m₁ x₁ sin α + √m₂ x₂ cos α
//! ```
//!
//! Together with the mass gauge `β_j = −ṁ_j / (2√m_j)` this removes every
//! `P·Q` cross term, leaving two forced oscillators with frequencies `Ω_j²`
//! plus a residual bilinear coupling `Γ(t) Q₁Q₂` that a well-chosen α cancels.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::timefn::{Jet, TimeFunction};

/// Something that can be evaluated as a real function of time.
pub trait Profile: Send + Sync {
    fn value(&self, t: f64) -> f64;
}

impl Profile for TimeFunction {
    fn value(&self, t: f64) -> f64 {
        TimeFunction::value(self, t)
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync> Profile for F {
    fn value(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Default relative tolerance for accepting a decoupling angle.
pub const DEFAULT_DECOUPLING_TOL: f64 = 1e-9;
/// Number of Chebyshev sample times used for the Γ residual.
pub const RESIDUAL_POINTS: usize = 513;
const ANGLE_SCAN: usize = 1024;
const DEGENERATE_SPLIT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorSpec {
    pub mass: TimeFunction,
    pub omega: TimeFunction,
    pub force: TimeFunction,
}

impl OscillatorSpec {
    pub fn new(mass: TimeFunction, omega: TimeFunction, force: TimeFunction) -> Self {
        Self { mass, omega, force }
    }

    /// Constant unit mass, constant frequency, no drive.
    pub fn harmonic(omega: f64) -> Self {
        Self::new(1.0.into(), omega.into(), 0.0.into())
    }
}

/// Two driven oscillators with time-dependent masses and frequencies,
/// coupled through `λ(t) x₁x₂`:
///
/// `H = Σ_j [p_j²/2m_j + ½ m_j ω_j² x_j² − m_j f_j x_j] + λ x₁x₂`
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    oscillators: [OscillatorSpec; 2],
    coupling: TimeFunction,
    hbar: f64,
    start: f64,
    end: f64,
}

impl SystemSpec {
    pub fn new(oscillators: [OscillatorSpec; 2], coupling: TimeFunction, hbar: f64, interval: (f64, f64)) -> Result<Self> {
        let (start, end) = interval;
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::InvalidSpec(format!("interval [{start}, {end}] must satisfy t'' > t'")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidSpec(format!("hbar must be positive, got {hbar}")));
        }
        for (j, osc) in oscillators.iter().enumerate() {
            for (name, f) in [("mass", &osc.mass), ("omega", &osc.omega), ("force", &osc.force)] {
                f.validate(start, end)
                    .map_err(|e| Error::InvalidSpec(format!("oscillator {}: {name}: {e}", j + 1)))?;
            }
            if !osc.mass.is_positive_on(start, end) {
                return Err(Error::InvalidSpec(format!("oscillator {}: mass must stay positive", j + 1)));
            }
        }
        coupling
            .validate(start, end)
            .map_err(|e| Error::InvalidSpec(format!("coupling: {e}")))?;
        Ok(Self { oscillators, coupling, hbar, start, end })
    }

    pub fn oscillator(&self, j: usize) -> &OscillatorSpec {
        &self.oscillators[j]
    }

    pub fn coupling(&self) -> &TimeFunction {
        &self.coupling
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    pub fn with_hbar(mut self, hbar: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidSpec(format!("hbar must be positive, got {hbar}")));
        }
        self.hbar = hbar;
        Ok(self)
    }

    pub fn mass(&self, j: usize, t: f64) -> f64 {
        self.oscillators[j].mass.value(t)
    }

    pub fn mass_jet(&self, j: usize, t: f64) -> Jet {
        self.oscillators[j].mass.jet(t)
    }

    pub fn omega_sq(&self, j: usize, t: f64) -> f64 {
        self.oscillators[j].omega.value(t).powi(2)
    }

    pub fn force(&self, j: usize, t: f64) -> f64 {
        self.oscillators[j].force.value(t)
    }

    pub fn lambda(&self, t: f64) -> f64 {
        self.coupling.value(t)
    }

    /// `λ / √(m₁m₂)`
    pub fn scaled_coupling(&self, t: f64) -> f64 {
        self.lambda(t) / (self.mass(0, t) * self.mass(1, t)).sqrt()
    }

    /// `ω̃_j² = ω_j² + ¼(ṁ_j²/m_j² − 2 m̈_j/m_j)`
    pub fn effective_frequency_sq(&self, j: usize, t: f64) -> f64 {
        let m = self.mass_jet(j, t);
        let r1 = m.d1 / m.value;
        let r2 = m.d2 / m.value;
        self.omega_sq(j, t) + 0.25 * (r1 * r1 - 2.0 * r2)
    }

    /// The gauge function `β_j = −ṁ_j/(2√m_j)` that cancels the `P·Q` terms.
    pub fn mass_gauge(&self, j: usize, t: f64) -> f64 {
        let m = self.mass_jet(j, t);
        -m.d1 / (2.0 * m.value.sqrt())
    }
}

/// `ω̃_j²(t)` as a profile.
pub fn effective_frequency_sq(spec: &SystemSpec, j: usize) -> impl Profile + '_ {
    move |t| spec.effective_frequency_sq(j, t)
}

/// `n` Chebyshev–Lobatto points on [start, end] (descending from `end`).
pub fn chebyshev_points(start: f64, end: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (start + end);
    let half = 0.5 * (end - start);
    if n == 1 {
        return vec![mid];
    }
    (0..n)
        .map(|k| mid + half * (PI * k as f64 / (n - 1) as f64).cos())
        .collect()
}

/// A system rotated into normal-mode coordinates by a constant angle.
#[derive(Debug, Clone)]
pub struct DecoupledSystem {
    spec: Arc<SystemSpec>,
    alpha: f64,
    residual: f64,
    threshold: f64,
}

impl DecoupledSystem {
    /// Rotate by an arbitrary angle; the Γ residual is measured but the
    /// result is only [`accepted`](Self::accepted) if it is within the
    /// default tolerance.
    pub fn with_angle(spec: &SystemSpec, alpha: f64) -> Self {
        Self::with_angle_tol(spec, alpha, DEFAULT_DECOUPLING_TOL)
    }

    pub fn with_angle_tol(spec: &SystemSpec, alpha: f64, tol: f64) -> Self {
        let samples = GammaSamples::new(spec);
        Self {
            spec: Arc::new(spec.clone()),
            alpha,
            residual: samples.residual(alpha),
            threshold: tol * samples.scale,
        }
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `sup_t |Γ(t)|` over the Chebyshev sample grid.
    pub fn gamma_residual(&self) -> f64 {
        self.residual
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn accepted(&self) -> bool {
        self.residual <= self.threshold
    }

    pub fn ensure_decoupled(&self) -> Result<()> {
        if self.accepted() {
            Ok(())
        } else {
            Err(Error::NotDecoupled { residual: self.residual, threshold: self.threshold })
        }
    }

    /// `Ω_j²(t)`
    pub fn omega_sq(&self, j: usize, t: f64) -> f64 {
        let (w1, w2) = (self.spec.effective_frequency_sq(0, t), self.spec.effective_frequency_sq(1, t));
        let kappa = self.spec.scaled_coupling(t);
        let (s, c) = self.alpha.sin_cos();
        let cross = kappa * (2.0 * self.alpha).sin();
        match j {
            0 => w1 * c * c + w2 * s * s - cross,
            _ => w1 * s * s + w2 * c * c + cross,
        }
    }

    /// `F_j(t)`
    pub fn force(&self, j: usize, t: f64) -> f64 {
        let g1 = self.spec.mass(0, t).sqrt() * self.spec.force(0, t);
        let g2 = self.spec.mass(1, t).sqrt() * self.spec.force(1, t);
        let (s, c) = self.alpha.sin_cos();
        match j {
            0 => g1 * c - g2 * s,
            _ => g1 * s + g2 * c,
        }
    }

    /// `Γ(t) = ½(ω̃₁² − ω̃₂²) sin 2α + λ/√(m₁m₂) cos 2α`
    pub fn gamma(&self, t: f64) -> f64 {
        gamma_at(&self.spec, self.alpha, t)
    }

    pub fn omega_sq_profile(&self, j: usize) -> impl Profile + '_ {
        move |t| self.omega_sq(j, t)
    }

    pub fn force_profile(&self, j: usize) -> impl Profile + '_ {
        move |t| self.force(j, t)
    }

    /// True when the drive of mode `j` vanishes identically.
    pub fn force_vanishes(&self, j: usize) -> bool {
        let (s, c) = self.alpha.sin_cos();
        let (w1, w2) = if j == 0 { (c, -s) } else { (s, c) };
        let (start, end) = self.spec.interval();
        let zero = |k: usize, w: f64| w == 0.0 || self.spec.oscillator(k).force.vanishes_on(start, end);
        zero(0, w1) && zero(1, w2)
    }

    pub fn normal_mode_coordinates(&self, x: (f64, f64), t: f64) -> (f64, f64) {
        normal_mode_coordinates(&self.spec, self.alpha, x, t)
    }

    pub fn lab_coordinates(&self, q: (f64, f64), t: f64) -> (f64, f64) {
        lab_coordinates(&self.spec, self.alpha, q, t)
    }
}

fn gamma_at(spec: &SystemSpec, alpha: f64, t: f64) -> f64 {
    let split = spec.effective_frequency_sq(0, t) - spec.effective_frequency_sq(1, t);
    0.5 * split * (2.0 * alpha).sin() + spec.scaled_coupling(t) * (2.0 * alpha).cos()
}

struct GammaSamples {
    half_split: Vec<f64>,
    kappa: Vec<f64>,
    scale: f64,
}

impl GammaSamples {
    fn new(spec: &SystemSpec) -> Self {
        let (start, end) = spec.interval();
        let ts = chebyshev_points(start, end, RESIDUAL_POINTS);
        let mut half_split = Vec::with_capacity(ts.len());
        let mut kappa = Vec::with_capacity(ts.len());
        let mut scale: f64 = 1.0;
        for &t in &ts {
            let (w1, w2) = (spec.effective_frequency_sq(0, t), spec.effective_frequency_sq(1, t));
            let k = spec.scaled_coupling(t);
            half_split.push(0.5 * (w1 - w2));
            kappa.push(k);
            scale = scale.max(w1.abs() + w2.abs() + k.abs());
        }
        Self { half_split, kappa, scale }
    }

    fn residual(&self, alpha: f64) -> f64 {
        let (s, c) = (2.0 * alpha).sin_cos();
        self.half_split
            .iter()
            .zip(&self.kappa)
            .map(|(a, k)| (a * s + k * c).abs())
            .fold(0.0, f64::max)
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-16 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 { x1 } else { x2 }
}

fn wrap_angle(mut alpha: f64) -> f64 {
    // |Γ| has period π/2 in α
    while alpha <= -FRAC_PI_4 {
        alpha += FRAC_PI_2;
    }
    while alpha > FRAC_PI_4 {
        alpha -= FRAC_PI_2;
    }
    alpha
}

/// Best constant rotation angle for the system, without acceptance check.
pub fn scan_decoupling_angle(spec: &SystemSpec, tol: f64) -> DecoupledSystem {
    let (start, end) = spec.interval();
    let samples = GammaSamples::new(spec);
    let make = |alpha: f64| DecoupledSystem {
        spec: Arc::new(spec.clone()),
        alpha,
        residual: samples.residual(alpha),
        threshold: tol * samples.scale,
    };
    if spec.coupling().vanishes_on(start, end) {
        return make(0.0);
    }
    if samples.half_split.iter().all(|a| 2.0 * a.abs() < DEGENERATE_SPLIT) {
        return make(FRAC_PI_4);
    }
    let step = FRAC_PI_2 / ANGLE_SCAN as f64;
    let mut best: (f64, f64) = (f64::INFINITY, 0.0);
    for k in 0..ANGLE_SCAN {
        let alpha = -FRAC_PI_4 + (k + 1) as f64 * step;
        let r = samples.residual(alpha);
        if r < best.0 || (r == best.0 && alpha.abs() < best.1.abs()) {
            best = (r, alpha);
        }
    }
    let refined = golden_section(|a| samples.residual(a), best.1 - step, best.1 + step);
    let alpha = if samples.residual(refined) <= best.0 { wrap_angle(refined) } else { best.1 };
    make(alpha)
}

/// Find the constant angle α that cancels Γ(t) on the whole interval.
///
/// `tol` is relative to `max(1, sup_t |ω̃₁²| + |ω̃₂²| + |λ|/√(m₁m₂))`.
pub fn find_decoupling_angle(spec: &SystemSpec, tol: f64) -> Result<DecoupledSystem> {
    let dec = scan_decoupling_angle(spec, tol);
    if dec.accepted() {
        Ok(dec)
    } else {
        Err(Error::NotDecouplable { residual: dec.residual, threshold: dec.threshold })
    }
}

pub fn normal_mode_coordinates(spec: &SystemSpec, alpha: f64, x: (f64, f64), t: f64) -> (f64, f64) {
    let y1 = spec.mass(0, t).sqrt() * x.0;
    let y2 = spec.mass(1, t).sqrt() * x.1;
    let (s, c) = alpha.sin_cos();
    (y1 * c - y2 * s, y1 * s + y2 * c)
}

pub fn lab_coordinates(spec: &SystemSpec, alpha: f64, q: (f64, f64), t: f64) -> (f64, f64) {
    let (s, c) = alpha.sin_cos();
    let y1 = q.0 * c + q.1 * s;
    let y2 = -q.0 * s + q.1 * c;
    (y1 / spec.mass(0, t).sqrt(), y2 / spec.mass(1, t).sqrt())
}

/// Choice of the quadratic gauge functions β_j in the generating function.
#[derive(Debug, Clone, Copy)]
pub enum Gauge<'a> {
    /// `β_j = −ṁ_j/(2√m_j)`
    Mass,
    /// Arbitrary β₁, β₂.
    Custom(&'a TimeFunction, &'a TimeFunction),
}

/// Coefficients of the transformed Hamiltonian
/// `½(P₁² + P₂²) + A P₁Q₁ + B P₂Q₂ + C(P₁Q₂ + P₂Q₁) + ½D₁Q₁² + ½D₂Q₂² + E Q₁Q₂ − F₁Q₁ − F₂Q₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d1: f64,
    pub d2: f64,
    pub e: f64,
    pub f1: f64,
    pub f2: f64,
    /// Gauge-shifted frequencies entering D₁, D₂, E.
    pub small_d1: f64,
    pub small_d2: f64,
}

/// Evaluate the coefficients of the transformed Hamiltonian at `t` for a
/// constant angle and the given gauge.
pub fn transform_coefficients(spec: &SystemSpec, alpha: f64, gauge: Gauge<'_>, t: f64) -> TransformCoefficients {
    // (β_j, d/dt(√m_j β_j)) per oscillator
    let beta = |j: usize| -> (f64, f64) {
        let m = spec.mass_jet(j, t);
        match gauge {
            Gauge::Mass => (-m.d1 / (2.0 * m.value.sqrt()), -0.5 * m.d2),
            Gauge::Custom(b1, b2) => {
                let b = if j == 0 { b1 } else { b2 }.jet(t);
                let sm = m.value.sqrt();
                (b.value, m.d1 / (2.0 * sm) * b.value + sm * b.d1)
            }
        }
    };
    let mut cross = [0.0; 2];
    let mut small_d = [0.0; 2];
    for j in 0..2 {
        let m = spec.mass_jet(j, t);
        let (b, dsb) = beta(j);
        cross[j] = b / m.value.sqrt() + m.d1 / (2.0 * m.value);
        small_d[j] = spec.omega_sq(j, t) + b * b / m.value + dsb / m.value;
    }
    let kappa = spec.scaled_coupling(t);
    let (s, c) = alpha.sin_cos();
    let (g1, g2) = (spec.mass(0, t).sqrt() * spec.force(0, t), spec.mass(1, t).sqrt() * spec.force(1, t));
    TransformCoefficients {
        a: cross[0] * c * c + cross[1] * s * s,
        b: cross[0] * s * s + cross[1] * c * c,
        c: (cross[0] - cross[1]) * s * c,
        d1: small_d[0] * c * c + small_d[1] * s * s - 2.0 * kappa * s * c,
        d2: small_d[0] * s * s + small_d[1] * c * c + 2.0 * kappa * s * c,
        e: (small_d[0] - small_d[1]) * s * c + kappa * (c * c - s * s),
        f1: g1 * c - g2 * s,
        f2: g1 * s + g2 * c,
        small_d1: small_d[0],
        small_d2: small_d[1],
    }
}
