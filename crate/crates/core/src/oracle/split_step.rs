//! Strang-split spectral integration of the lab-frame Schrödinger equation.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::Wavefunction2D;
use crate::error::{Error, Result};
use crate::system::SystemSpec;

/// Population allowed within [`BOUNDARY_CELLS`] of the grid edge.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;
pub const BOUNDARY_CELLS: usize = 3;

const CHECK_EVERY: usize = 100;

struct Fft2 {
    n1: usize,
    n2: usize,
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
    scratch: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl Fft2 {
    fn new(n1: usize, n2: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = [planner.plan_fft_forward(n2), planner.plan_fft_forward(n1)];
        let inv = [planner.plan_fft_inverse(n2), planner.plan_fft_inverse(n1)];
        let scratch_len = fwd.iter().chain(&inv).map(|f| f.get_inplace_scratch_len()).max().unwrap_or(0);
        Self { n1, n2, fwd, inv, scratch: vec![Complex64::default(); scratch_len], buf: vec![Complex64::default(); n1 * n2] }
    }

    /// Forward transform; on return `data` holds the spectrum transposed,
    /// i.e. indexed `[k₂][k₁]`.
    fn forward(&mut self, data: &mut [Complex64]) {
        self.fwd[0].process_with_scratch(data, &mut self.scratch);
        transpose::transpose(data, &mut self.buf, self.n2, self.n1);
        self.fwd[1].process_with_scratch(&mut self.buf, &mut self.scratch);
        data.copy_from_slice(&self.buf);
    }

    /// Inverse of [`Fft2::forward`], normalised.
    fn inverse(&mut self, data: &mut [Complex64]) {
        self.inv[1].process_with_scratch(data, &mut self.scratch);
        transpose::transpose(data, &mut self.buf, self.n1, self.n2);
        self.inv[0].process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / (self.n1 * self.n2) as f64;
        for (d, b) in data.iter_mut().zip(&self.buf) {
            *d = b * scale;
        }
    }
}

/// Evolves `psi` (at `psi.time`) to `t_final` with steps of at most `dt`.
///
/// Each step is `K(h/2)·V(h)·K(h/2)` with every coefficient frozen at the
/// step midpoint; consecutive kinetic half-steps are merged. The grid is
/// periodic, so the wavefunction must stay away from the boundary; this is
/// checked every hundred steps and at the end.
pub fn split_step_evolve(psi: &Wavefunction2D, spec: &SystemSpec, t_final: f64, dt: f64) -> Result<Wavefunction2D> {
    let [a1, a2] = psi.grid.axes;
    if !a1.n.is_power_of_two() || !a2.n.is_power_of_two() {
        return Err(Error::GridMismatch(format!("grid sizes must be powers of two, got {}×{}", a1.n, a2.n)));
    }
    if !(dt > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidSpec(format!("invalid time step {dt} or final time {t_final}")));
    }
    check_boundary(psi)?;
    let t0 = psi.time;
    let span = t_final - t0;
    let steps = (span.abs() / dt).ceil().max(if span == 0.0 { 0.0 } else { 1.0 }) as usize;
    let mut out = psi.clone();
    if steps == 0 {
        return Ok(out);
    }
    let h = span / steps as f64;
    let hbar = spec.hbar();
    let (n1, n2) = (a1.n, a2.n);
    let x1 = a1.points();
    let x2 = a2.points();
    let k1 = a1.wavenumbers();
    let k2 = a2.wavenumbers();
    let mut fft = Fft2::new(n1, n2);
    let data = &mut out.values;

    // Kinetic factor exp(−i ħ τ k²/2m), τ summing the two merged half-steps.
    let mut kinetic = |data: &mut [Complex64], tau: [f64; 2]| {
        fft.forward(data);
        let e1: Vec<Complex64> = k1.iter().map(|k| Complex64::from_polar(1.0, -hbar * tau[0] * k * k / 2.0)).collect();
        let e2: Vec<Complex64> = k2.iter().map(|k| Complex64::from_polar(1.0, -hbar * tau[1] * k * k / 2.0)).collect();
        // spectrum is laid out [k₂][k₁]
        for (row, f2) in data.chunks_exact_mut(n1).zip(&e2) {
            for (v, f1) in row.iter_mut().zip(&e1) {
                *v *= f1 * f2;
            }
        }
        fft.inverse(data);
    };
    let inv_mass = |t: f64| [1.0 / spec.mass(0, t), 1.0 / spec.mass(1, t)];

    let mut pending = {
        let im = inv_mass(t0 + 0.5 * h);
        [0.5 * h * im[0], 0.5 * h * im[1]]
    };
    for step in 0..steps {
        let tm = t0 + (step as f64 + 0.5) * h;
        kinetic(data, pending);

        let m = [spec.mass(0, tm), spec.mass(1, tm)];
        let w2 = [spec.omega_sq(0, tm), spec.omega_sq(1, tm)];
        let f = [spec.force(0, tm), spec.force(1, tm)];
        let lam = spec.lambda(tm);
        let phase = |x: f64, j: usize| -h / hbar * (0.5 * m[j] * w2[j] * x * x - m[j] * f[j] * x);
        let v1: Vec<f64> = x1.iter().map(|&x| phase(x, 0)).collect();
        let v2: Vec<f64> = x2.iter().map(|&x| phase(x, 1)).collect();
        for (i, row) in data.chunks_exact_mut(n2).enumerate() {
            let c = -h / hbar * lam * x1[i];
            for (j, v) in row.iter_mut().enumerate() {
                *v *= Complex64::from_polar(1.0, v1[i] + v2[j] + c * x2[j]);
            }
        }

        let this = inv_mass(tm);
        pending = if step + 1 < steps {
            let next = inv_mass(tm + h);
            [0.5 * h * (this[0] + next[0]), 0.5 * h * (this[1] + next[1])]
        } else {
            [0.5 * h * this[0], 0.5 * h * this[1]]
        };
        if (step + 1) % CHECK_EVERY == 0 {
            out_boundary(data, &psi.grid)?;
        }
    }
    kinetic(data, pending);
    out.time = t_final;
    check_boundary(&out)?;
    Ok(out)
}

fn out_boundary(values: &[Complex64], grid: &super::grid::Grid2D) -> Result<()> {
    let w = Wavefunction2D { grid: *grid, values: values.to_vec(), time: 0.0 };
    check_boundary(&w)
}

fn check_boundary(psi: &Wavefunction2D) -> Result<()> {
    let population = psi.boundary_population(BOUNDARY_CELLS);
    if population > BOUNDARY_TOLERANCE {
        Err(Error::GridTooCoarse { population })
    } else {
        Ok(())
    }
}
