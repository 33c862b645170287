//! Uniform periodic grids and sampled two-dimensional wavefunctions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One axis of `n` points `lo + k·(hi − lo)/n`, `k = 0..n` (periodic: `hi`
/// itself is not a grid point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Axis {
    pub fn new(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::GridMismatch(format!("invalid axis: {n} points on [{lo}, {hi}]")));
        }
        Ok(Self { n, lo, hi })
    }

    /// Symmetric axis `[-half_width, half_width)`.
    pub fn symmetric(n: usize, half_width: f64) -> Result<Self> {
        Self::new(n, -half_width, half_width)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn point(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.step()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.point(k)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * std::f64::consts::PI / self.span();
        (0..self.n)
            .map(|k| {
                let m = if k < self.n.div_ceil(2) { k as isize } else { k as isize - self.n as isize };
                m as f64 * dk
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub axes: [Axis; 2],
}

impl Grid2D {
    pub fn new(x1: Axis, x2: Axis) -> Self {
        Self { axes: [x1, x2] }
    }

    /// Square grid of `n × n` points on `[-half_width, half_width)²`.
    pub fn square(n: usize, half_width: f64) -> Result<Self> {
        let a = Axis::symmetric(n, half_width)?;
        Ok(Self::new(a, a))
    }

    pub fn len(&self) -> usize {
        self.axes[0].n * self.axes[1].n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.axes[0].step() * self.axes[1].step()
    }

    /// Coordinates of the point with row-major index `idx` (x₁ outer).
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let n2 = self.axes[1].n;
        (self.axes[0].point(idx / n2), self.axes[1].point(idx % n2))
    }

    pub fn same_as(&self, other: &Grid2D) -> bool {
        self.axes.iter().zip(&other.axes).all(|(a, b)| {
            a.n == b.n && (a.lo - b.lo).abs() <= 1e-12 * a.span() && (a.hi - b.hi).abs() <= 1e-12 * a.span()
        })
    }
}

/// Complex samples on a [`Grid2D`], row-major with x₁ as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction2D {
    pub grid: Grid2D,
    pub values: Vec<Complex64>,
    pub time: f64,
}

impl Wavefunction2D {
    pub fn new(grid: Grid2D, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for a grid of {}", values.len(), grid.len())));
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_fn(grid: Grid2D, time: f64, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x1, x2) = grid.coords(idx);
                f(x1, x2)
            })
            .collect();
        Self { grid, values, time }
    }

    /// `(∑|ψ|² ΔA)^{1/2}`
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for v in &mut self.values {
                *v /= n;
            }
        }
    }

    pub fn inner(&self, other: &Wavefunction2D) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.cell_area())
    }

    /// `‖ψ − φ‖₂`
    pub fn l2_distance(&self, other: &Wavefunction2D) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.grid.cell_area()).sqrt())
    }

    /// `max|ψ − φ| / max|φ|`
    pub fn linf_relative(&self, other: &Wavefunction2D) -> Result<f64> {
        self.check_same_grid(other)?;
        let diff = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = other.values.iter().map(|b| b.norm()).fold(0.0, f64::max);
        Ok(diff / scale)
    }

    /// Probability within `cells` cells of any edge of the grid.
    pub fn boundary_population(&self, cells: usize) -> f64 {
        let [a1, a2] = self.grid.axes;
        let near = |k: usize, n: usize| k < cells || k + cells >= n;
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(idx, _)| near(idx / a2.n, a1.n) || near(idx % a2.n, a2.n))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        s * self.grid.cell_area()
    }

    fn check_same_grid(&self, other: &Wavefunction2D) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("wavefunctions live on different grids".into()))
        }
    }

    /// Separable Lagrange interpolation (`order` points per axis) at an
    /// arbitrary point; the function is taken to vanish outside the grid.
    pub fn interpolate(&self, x: (f64, f64), order: usize) -> Complex64 {
        let [a1, a2] = self.grid.axes;
        let (Some((i1, w1)), Some((i2, w2))) = (lagrange_stencil(&a1, x.0, order), lagrange_stencil(&a2, x.1, order)) else {
            return Complex64::new(0.0, 0.0);
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, wp) in w1.iter().enumerate() {
            let Some(r) = offset(i1, p, a1.n) else { continue };
            let mut row = Complex64::new(0.0, 0.0);
            for (q, wq) in w2.iter().enumerate() {
                if let Some(c) = offset(i2, q, a2.n) {
                    row += self.values[r * a2.n + c] * *wq;
                }
            }
            acc += row * *wp;
        }
        acc
    }
}

fn offset(start: isize, k: usize, n: usize) -> Option<usize> {
    let i = start + k as isize;
    (i >= 0 && (i as usize) < n).then_some(i as usize)
}

/// First stencil index and weights of the `order`-point Lagrange
/// interpolant at `x`; `None` when `x` lies well outside the axis.
fn lagrange_stencil(axis: &Axis, x: f64, order: usize) -> Option<(isize, Vec<f64>)> {
    let h = axis.step();
    let s = (x - axis.lo) / h;
    if s < -(order as f64) || s > (axis.n + order) as f64 {
        return None;
    }
    let base = s.floor() as isize - (order as isize - 1) / 2;
    let frac = s - base as f64;
    // barycentric weights for equispaced nodes 0..order
    let mut w = vec![0.0; order];
    for (k, wk) in w.iter_mut().enumerate() {
        let d = frac - k as f64;
        if d.abs() < 1e-14 {
            let mut exact = vec![0.0; order];
            exact[k] = 1.0;
            return Some((base, exact));
        }
        let mut c = 1.0;
        for j in 0..order {
            if j != k {
                c *= (frac - j as f64) / (k as f64 - j as f64);
            }
        }
        *wk = c;
    }
    Some((base, w))
}

/// Gaussian wavepacket parameters (per axis: centre, width σ of |ψ|²'s
/// standard deviation, mean momentum).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub center: [f64; 2],
    pub sigma: [f64; 2],
    #[serde(default)]
    pub momentum: [f64; 2],
}

impl GaussianPacket {
    pub fn new(center: [f64; 2], sigma: [f64; 2], momentum: [f64; 2]) -> Self {
        Self { center, sigma, momentum }
    }

    pub fn value(&self, x: (f64, f64), hbar: f64) -> Complex64 {
        let mut v = Complex64::new(1.0, 0.0);
        for (j, xj) in [x.0, x.1].into_iter().enumerate() {
            let s = self.sigma[j];
            let d = xj - self.center[j];
            let amp = (2.0 * std::f64::consts::PI * s * s).powf(-0.25) * (-d * d / (4.0 * s * s)).exp();
            v *= Complex64::from_polar(amp, self.momentum[j] * xj / hbar);
        }
        v
    }

    pub fn sample(&self, grid: Grid2D, time: f64, hbar: f64) -> Wavefunction2D {
        Wavefunction2D::from_fn(grid, time, |x1, x2| self.value((x1, x2), hbar))
    }
}
