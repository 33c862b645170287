//! Applying the closed-form kernel to sampled wavefunctions.
//!
//! The kernel factorises in normal-mode coordinates, so the 4-D integral
//! `∬K ψ d²x′` becomes two 1-D matrix products on a `Q` grid. We work with
//! the mode-frame amplitude `χ(Q, t) = (m₁m₂)^{-1/4} ψ(x(Q, t), t)`, which is
//! unit-normalised in `d²Q`; the mass boundary phases are applied pointwise.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::grid::{Axis, Grid2D, Wavefunction2D};
use crate::error::{Error, Result};
use crate::kernel::{ModeKernel, Propagator};
use crate::system::DecoupledSystem;

/// Lagrange order used when moving between lab and mode grids.
pub const INTERPOLATION_ORDER: usize = 10;

/// Tolerated norm loss when resampling onto a mode grid.
const COVERAGE_TOLERANCE: f64 = 1e-6;

/// A normal-mode coordinate grid attached to a decoupled system.
#[derive(Debug, Clone, Copy)]
pub struct ModeFrame<'a> {
    dec: &'a DecoupledSystem,
    pub grid: Grid2D,
}

impl<'a> ModeFrame<'a> {
    pub fn new(dec: &'a DecoupledSystem, grid: Grid2D) -> Self {
        Self { dec, grid }
    }

    fn mass_factor(&self, t: f64) -> f64 {
        let spec = self.dec.spec();
        (spec.mass(0, t) * spec.mass(1, t)).powf(-0.25)
    }

    /// `χ(Q) = (m₁m₂)^{-1/4} f(x(Q, t))` for a lab-frame function `f`.
    pub fn sample(&self, t: f64, f: impl Fn(f64, f64) -> Complex64 + Sync) -> Wavefunction2D {
        let w = self.mass_factor(t);
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|idx| {
                let x = self.dec.lab_coordinates(self.grid.coords(idx), t);
                f(x.0, x.1) * w
            })
            .collect();
        Wavefunction2D { grid: self.grid, values, time: t }
    }

    /// Resamples a lab-frame wavefunction onto the mode grid.
    pub fn from_lab(&self, psi: &Wavefunction2D) -> Result<Wavefunction2D> {
        let chi = self.sample(psi.time, |x1, x2| psi.interpolate((x1, x2), INTERPOLATION_ORDER));
        let lost = (psi.norm() - chi.norm()).abs();
        if lost > COVERAGE_TOLERANCE * psi.norm().max(1e-300) {
            return Err(Error::GridMismatch(format!(
                "mode grid does not cover the wavefunction (norm changes by {lost:e})"
            )));
        }
        Ok(chi)
    }

    /// Resamples a mode-frame amplitude back onto a lab grid.
    pub fn to_lab(&self, chi: &Wavefunction2D, lab: Grid2D) -> Wavefunction2D {
        let w = 1.0 / self.mass_factor(chi.time);
        let values = (0..lab.len())
            .into_par_iter()
            .map(|idx| {
                let q = self.dec.normal_mode_coordinates(lab.coords(idx), chi.time);
                chi.interpolate(q, INTERPOLATION_ORDER) * w
            })
            .collect();
        Wavefunction2D { grid: lab, values, time: chi.time }
    }
}

/// Quadrature matrix `M[a][b] ≈ K(Q_a, Q_b)·ΔQ` of one mode kernel on a
/// periodic axis, row-major.
///
/// Sampling the kernel directly is exact (spectrally) while the aliased
/// image of its chirp `β(Q″ − Q′)²`, `β = −C/2`, stays off the grid, i.e.
/// for `|β| < π/(ΔQ·L)`. Beyond that (short times, near-delta kernels) the
/// chirp is applied instead as an exact Fresnel convolution in Fourier
/// space, which is accurate precisely in the complementary regime.
pub fn mode_matrix(kernel: &ModeKernel, axis: &Axis) -> Vec<Complex64> {
    let n = axis.n;
    let dq = axis.step();
    let q = axis.points();
    let [a, b, c, d, e, f0] = kernel.coefficients();
    let beta = -0.5 * c;
    let critical = std::f64::consts::PI / (dq * axis.span());
    let mut m = vec![Complex64::default(); n * n];
    if beta.abs() < critical {
        m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = kernel.eval(q[i], q[j]) * dq;
            }
        });
        return m;
    }
    // K = amp · e^{i(a₂Q″² + DQ″ + F₀)} · e^{iβ(Q″−Q′)²} · e^{i(b₂Q′² + EQ′)}
    let (a2, b2) = (a - beta, b - beta);
    let sign = beta.signum();
    let fresnel = (std::f64::consts::PI / beta.abs()).sqrt();
    let mut spectrum: Vec<Complex64> = axis
        .wavenumbers()
        .iter()
        .map(|k| Complex64::from_polar(fresnel, sign * std::f64::consts::FRAC_PI_4 - k * k / (4.0 * beta)))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    let conv: Vec<Complex64> = spectrum.iter().map(|v| v / n as f64).collect();
    let amp = kernel.amplitude() * Complex64::from_polar(1.0, f0);
    let left: Vec<Complex64> = q.iter().map(|&x| amp * Complex64::from_polar(1.0, a2 * x * x + d * x)).collect();
    let right: Vec<Complex64> = q.iter().map(|&x| Complex64::from_polar(1.0, b2 * x * x + e * x)).collect();
    m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = left[i] * conv[(i + n - j) % n] * right[j];
        }
    });
    m
}

/// `Y = M₁ X M₂ᵀ` for row-major `X` of shape `n₁ × n₂`.
fn apply_separable(m1: &[Complex64], m2: &[Complex64], x: &[Complex64], n1: usize, n2: usize) -> Vec<Complex64> {
    // Z = X M₂ᵀ: rows of X against rows of M₂
    let mut z = vec![Complex64::default(); n1 * n2];
    z.par_chunks_mut(n2).enumerate().for_each(|(a, zrow)| {
        let xrow = &x[a * n2..(a + 1) * n2];
        for (b, zv) in zrow.iter_mut().enumerate() {
            let mrow = &m2[b * n2..(b + 1) * n2];
            *zv = xrow.iter().zip(mrow).map(|(p, q)| p * q).sum();
        }
    });
    // Y = M₁ Z
    let mut y = vec![Complex64::default(); n1 * n2];
    y.par_chunks_mut(n2).enumerate().for_each(|(a, yrow)| {
        for (c, m) in m1[a * n1..(a + 1) * n1].iter().enumerate() {
            for (yv, zv) in yrow.iter_mut().zip(&z[c * n2..(c + 1) * n2]) {
                *yv += m * zv;
            }
        }
    });
    y
}

/// Propagates a mode-frame amplitude sampled at `t′` to `t″`.
pub fn propagate_in_mode_frame(chi: &Wavefunction2D, prop: &Propagator) -> Result<Wavefunction2D> {
    let (t_i, t_f) = prop.times();
    if (chi.time - t_i).abs() > 1e-12 * t_i.abs().max(1.0) {
        return Err(Error::GridMismatch(format!("wavefunction is at t = {}, kernel starts at {t_i}", chi.time)));
    }
    let dec = prop.decoupled();
    let [a1, a2] = chi.grid.axes;
    let (n1, n2) = (a1.n, a2.n);
    let (m1, m2) = rayon::join(|| mode_matrix(prop.mode(0), &a1), || mode_matrix(prop.mode(1), &a2));
    let boundary = |idx: usize, t: f64, final_time: bool| {
        let x = dec.lab_coordinates(chi.grid.coords(idx), t);
        Complex64::from_polar(1.0, prop.endpoint_phase(x, final_time))
    };
    let source: Vec<Complex64> =
        chi.values.par_iter().enumerate().map(|(idx, v)| v * boundary(idx, t_i, false)).collect();
    let mut out = apply_separable(&m1, &m2, &source, n1, n2);
    out.par_iter_mut().enumerate().for_each(|(idx, v)| *v *= boundary(idx, t_f, true));
    Ok(Wavefunction2D { grid: chi.grid, values: out, time: t_f })
}

/// `ψ(x″, t″) = ∬K(x″, t″; x′, t′) ψ(x′, t′) d²x′`, evaluated through the
/// separable mode structure on `mode_grid` and returned on `psi`'s grid.
pub fn propagate_with_kernel(psi: &Wavefunction2D, prop: &Propagator, mode_grid: Grid2D) -> Result<Wavefunction2D> {
    let frame = ModeFrame::new(prop.decoupled(), mode_grid);
    let chi = frame.from_lab(psi)?;
    let evolved = propagate_in_mode_frame(&chi, prop)?;
    Ok(frame.to_lab(&evolved, psi.grid))
}
