//! Semiclassical (Van Vleck–Pauli–Morette) kernel built from classical
//! trajectories. Exact for quadratic Hamiltonians, and computed without any
//! of the canonical-transform machinery.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{Branch, ComplexKernel};
use crate::ode::{self, DenseSolution, Tolerances};
use crate::system::{Profile, SystemSpec};

/// Adaptive RK tolerance for every trajectory integration.
pub const TOLERANCES: Tolerances = Tolerances { rtol: 1e-12, atol: 1e-14, max_steps: 2_000_000, max_step: None };

/// Relative singularity threshold of the shooting matrix `∂x″/∂p′`.
const SHOOTING_GUARD: f64 = 1e-10;

/// `H = ½pᵀT(t)p + ½xᵀV(t)x − g(t)ᵀx` in `N ≤ 2` dimensions; `T` and `V`
/// are symmetric, row-major.
pub trait QuadraticHamiltonian: Sync {
    fn dim(&self) -> usize;
    fn coefficients(&self, t: f64, kinetic: &mut [f64], potential: &mut [f64], drive: &mut [f64]);
}

/// The original lab-frame Hamiltonian of a [`SystemSpec`].
impl QuadraticHamiltonian for SystemSpec {
    fn dim(&self) -> usize {
        2
    }

    fn coefficients(&self, t: f64, kinetic: &mut [f64], potential: &mut [f64], drive: &mut [f64]) {
        let m = [self.mass(0, t), self.mass(1, t)];
        kinetic.copy_from_slice(&[1.0 / m[0], 0.0, 0.0, 1.0 / m[1]]);
        let l = self.lambda(t);
        potential.copy_from_slice(&[m[0] * self.omega_sq(0, t), l, l, m[1] * self.omega_sq(1, t)]);
        drive.copy_from_slice(&[m[0] * self.force(0, t), m[1] * self.force(1, t)]);
    }
}

/// A single unit-mass mode `H = p²/2 + ½Ω²(t)q² − F(t)q`.
pub struct ForcedMode<'a, W: ?Sized, F: ?Sized> {
    pub omega_sq: &'a W,
    pub force: &'a F,
}

impl<W: Profile + ?Sized, F: Profile + ?Sized> QuadraticHamiltonian for ForcedMode<'_, W, F> {
    fn dim(&self) -> usize {
        1
    }

    fn coefficients(&self, t: f64, kinetic: &mut [f64], potential: &mut [f64], drive: &mut [f64]) {
        kinetic[0] = 1.0;
        potential[0] = self.omega_sq.value(t);
        drive[0] = self.force.value(t);
    }
}

struct Coeffs {
    t: [f64; 4],
    v: [f64; 4],
    g: [f64; 2],
}

fn coeffs<H: QuadraticHamiltonian + ?Sized>(h: &H, t: f64) -> Coeffs {
    let n = h.dim();
    let mut c = Coeffs { t: [0.0; 4], v: [0.0; 4], g: [0.0; 2] };
    h.coefficients(t, &mut c.t[..n * n], &mut c.v[..n * n], &mut c.g[..n]);
    c
}

/// `ẋ = Tp`, `ṗ = −Vx + s·g` on the state `[x, p]`.
fn hamilton_rhs(n: usize, c: &Coeffs, y: &[f64], dy: &mut [f64], drive: f64) {
    let (x, p) = y.split_at(n);
    for i in 0..n {
        let mut xd = 0.0;
        let mut pd = drive * c.g[i];
        for j in 0..n {
            xd += c.t[i * n + j] * p[j];
            pd -= c.v[i * n + j] * x[j];
        }
        dy[i] = xd;
        dy[n + i] = pd;
    }
}

/// Solution of the classical boundary-value problem between two points.
#[derive(Debug, Clone)]
pub struct ClassicalTrajectory {
    pub x_initial: Vec<f64>,
    pub x_final: Vec<f64>,
    pub p_initial: Vec<f64>,
    pub p_final: Vec<f64>,
    /// Hamilton's principal function `∫(p·ẋ − H)dt` along the path.
    pub action: f64,
    /// `‖x(t″) − x″‖`, a posteriori.
    pub boundary_residual: f64,
    /// Stability block `∂x″/∂p′`, row-major.
    pub stability: Vec<f64>,
    path: DenseSolution,
    dim: usize,
}

impl ClassicalTrajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> (f64, f64) {
        (self.path.start(), self.path.end())
    }

    /// `(x(t), p(t))` on the solved path.
    pub fn state(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let y = self.path.eval(t)?;
        Ok((y[..self.dim].to_vec(), y[self.dim..2 * self.dim].to_vec()))
    }
}

/// Endpoint-independent data of the linear flow from `t′` to `t″`: the
/// fundamental matrix, the driven particular solution, and the Maslov
/// count of the Lagrangian plane `(∂x/∂p′, ∂p/∂p′)`.
pub struct VanVleck<'h, H: QuadraticHamiltonian + ?Sized> {
    ham: &'h H,
    hbar: f64,
    t_i: f64,
    t_f: f64,
    dim: usize,
    /// Φ(t″) as `[[xx, xp], [px, pp]]` blocks, 2n×2n row-major.
    fundamental: Vec<f64>,
    particular: Vec<f64>,
    /// Continuous eigenphases of `W = (P + iX)(P − iX)⁻¹` at `t″`.
    eigenphases: Vec<f64>,
}

impl<'h, H: QuadraticHamiltonian + ?Sized> VanVleck<'h, H> {
    pub fn new(ham: &'h H, t_i: f64, t_f: f64, hbar: f64) -> Result<Self> {
        let n = ham.dim();
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidSpec(format!("Van Vleck oracle supports 1 or 2 dimensions, not {n}")));
        }
        if !(t_f > t_i) || !(hbar > 0.0) {
            return Err(Error::InvalidSpec(format!("need t″ > t′ and ħ > 0 (got {t_i} → {t_f}, ħ = {hbar})")));
        }
        let m = 2 * n;
        // state: Φ (m×m, column k = flow of unit vector e_k) then the particular solution
        let dim = m * m + m;
        let mut y0 = vec![0.0; dim];
        for k in 0..m {
            y0[k * m + k] = 1.0;
        }
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            let c = coeffs(ham, t);
            for k in 0..m {
                hamilton_rhs(n, &c, &y[k * m..(k + 1) * m], &mut dy[k * m..(k + 1) * m], 0.0);
            }
            hamilton_rhs(n, &c, &y[m * m..], &mut dy[m * m..], 1.0);
        };
        let sol = ode::integrate(rhs, t_i, &y0, t_f, &TOLERANCES)?;
        let end = sol.final_state();
        // column-major columns → row-major matrix
        let mut fundamental = vec![0.0; m * m];
        for k in 0..m {
            for r in 0..m {
                fundamental[r * m + k] = end[k * m + r];
            }
        }
        let particular = end[m * m..].to_vec();
        let eigenphases = track_eigenphases(&sol, n)?;
        Ok(Self { ham, hbar, t_i, t_f, dim: n, fundamental, particular, eigenphases })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn block(&self, r0: usize, c0: usize) -> Vec<f64> {
        let (n, m) = (self.dim, 2 * self.dim);
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                b[i * n + j] = self.fundamental[(r0 + i) * m + c0 + j];
            }
        }
        b
    }

    /// Largest entry of the fundamental matrix; the reference for deciding
    /// that `∂x″/∂p′` is singular.
    fn flow_scale(&self) -> f64 {
        self.fundamental.iter().fold(0.0f64, |s, v| s.max(v.abs()))
    }

    /// `∂x″/∂p′`
    pub fn stability(&self) -> Vec<f64> {
        self.block(0, self.dim)
    }

    /// Number of focal points crossed on `(t′, t″)`.
    pub fn maslov_index(&self) -> i64 {
        self.branches().iter().map(|b| b.maslov_index).sum()
    }

    /// One branch per eigenphase of `W`, with `phase = ψ/2`, so that a
    /// single oscillator reproduces the mode-kernel branch bookkeeping.
    pub fn branches(&self) -> Vec<Branch> {
        self.eigenphases.iter().map(|psi| Branch::new(0.5 * psi)).collect()
    }

    /// Shoots the trajectory from `x′` to `x″` and integrates its action.
    pub fn trajectory(&self, x_f: &[f64], x_i: &[f64]) -> Result<ClassicalTrajectory> {
        let n = self.dim;
        if x_f.len() != n || x_i.len() != n {
            return Err(Error::InvalidSpec(format!("endpoints must have {n} components")));
        }
        let xx = self.block(0, 0);
        let xp = self.stability();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = x_f[i] - self.particular[i] - (0..n).map(|j| xx[i * n + j] * x_i[j]).sum::<f64>();
        }
        let p_i = solve_small(&xp, &rhs, n, self.flow_scale()).ok_or(Error::Caustic { phase: f64::NAN })?;

        let ham = self.ham;
        let mut y0 = vec![0.0; 2 * n + 1];
        y0[..n].copy_from_slice(x_i);
        y0[n..2 * n].copy_from_slice(&p_i);
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            let c = coeffs(ham, t);
            hamilton_rhs(n, &c, &y[..2 * n], &mut dy[..2 * n], 1.0);
            dy[2 * n] = lagrangian(n, &c, &y[..2 * n]);
        };
        let path = ode::integrate(rhs, self.t_i, &y0, self.t_f, &TOLERANCES)?;
        let end = path.final_state();
        let boundary_residual = (0..n).map(|i| (end[i] - x_f[i]).powi(2)).sum::<f64>().sqrt();
        Ok(ClassicalTrajectory {
            x_initial: x_i.to_vec(),
            x_final: x_f.to_vec(),
            p_initial: p_i,
            p_final: end[n..2 * n].to_vec(),
            action: end[2 * n],
            boundary_residual,
            stability: xp,
            path,
            dim: n,
        })
    }

    /// `(2πiħ)^{-N/2} |det ∂x″/∂p′|^{-1/2} e^{−iπν/2} e^{iS/ħ}`
    pub fn kernel(&self, x_f: &[f64], x_i: &[f64]) -> Result<ComplexKernel> {
        let traj = self.trajectory(x_f, x_i)?;
        let det = det_small(&traj.stability, self.dim);
        let nu = self.maslov_index();
        let n = self.dim as f64;
        let amp = (2.0 * std::f64::consts::PI * self.hbar).powf(-0.5 * n) * det.abs().powf(-0.5);
        let phase =
            traj.action / self.hbar - n * std::f64::consts::FRAC_PI_4 - nu as f64 * std::f64::consts::FRAC_PI_2;
        Ok(ComplexKernel { value: Complex64::from_polar(amp, phase), branches: self.branches() })
    }

    pub fn eval(&self, x_f: &[f64], x_i: &[f64]) -> Result<Complex64> {
        Ok(self.kernel(x_f, x_i)?.value)
    }
}

/// `L = p·ẋ − H = ½pᵀTp − ½xᵀVx + gᵀx`
fn lagrangian(n: usize, c: &Coeffs, y: &[f64]) -> f64 {
    let (x, p) = y.split_at(n);
    let mut l = 0.0;
    for i in 0..n {
        for j in 0..n {
            l += 0.5 * p[i] * c.t[i * n + j] * p[j] - 0.5 * x[i] * c.v[i * n + j] * x[j];
        }
        l += c.g[i] * x[i];
    }
    l
}

/// One-shot convenience wrapper around [`VanVleck`].
pub fn van_vleck_kernel<H: QuadraticHamiltonian + ?Sized>(
    ham: &H,
    x_f: &[f64],
    x_i: &[f64],
    t_f: f64,
    t_i: f64,
    hbar: f64,
) -> Result<ComplexKernel> {
    VanVleck::new(ham, t_i, t_f, hbar)?.kernel(x_f, x_i)
}

fn det_small(a: &[f64], n: usize) -> f64 {
    match n {
        1 => a[0],
        _ => a[0] * a[3] - a[1] * a[2],
    }
}

fn solve_small(a: &[f64], b: &[f64], n: usize, scale: f64) -> Option<Vec<f64>> {
    let det = det_small(a, n);
    if !(det.abs() > SHOOTING_GUARD * scale.powi(n as i32)) {
        return None;
    }
    Some(match n {
        1 => vec![b[0] / det],
        _ => vec![(a[3] * b[0] - a[1] * b[1]) / det, (a[0] * b[1] - a[2] * b[0]) / det],
    })
}

/// Eigenphases of `W(t) = (P + iX)(P − iX)⁻¹`, followed continuously from
/// `0⁺` at `t′`. An eigenvalue passes through 1 exactly where `X = ∂x/∂p′`
/// is singular, so `⌊ψ/2π⌋` counts focal points.
fn track_eigenphases(sol: &DenseSolution, n: usize) -> Result<Vec<f64>> {
    const SUB: usize = 8;
    let m = 2 * n;
    let nodes = sol.nodes();
    let mut y = vec![0.0; sol.dim()];
    let mut prev: Option<Vec<f64>> = None;
    for w in nodes.windows(2) {
        for s in 1..=SUB {
            let t = w[0] + (w[1] - w[0]) * s as f64 / SUB as f64;
            sol.eval_into(t, &mut y);
            // X = ∂x/∂p′, P = ∂p/∂p′: columns n..2n of Φ (stored column-major)
            let mut x = vec![Complex64::default(); n * n];
            let mut p = vec![Complex64::default(); n * n];
            for c in 0..n {
                let col = &y[(n + c) * m..(n + c + 1) * m];
                for r in 0..n {
                    x[r * n + c] = Complex64::new(col[r], 0.0);
                    p[r * n + c] = Complex64::new(col[n + r], 0.0);
                }
            }
            let raw = w_eigenphases(&x, &p, n)?;
            prev = Some(match prev {
                None => {
                    // just after t′: W ≈ 1 + 2iTτ with T > 0, so the phases are small and positive
                    raw.iter().map(|v| v.rem_euclid(2.0 * std::f64::consts::PI)).map(wrap_small_positive).collect()
                }
                Some(old) => follow(&old, &raw),
            });
        }
    }
    prev.ok_or_else(|| Error::Integrator { t: sol.start(), message: "empty trajectory".into() })
}

fn wrap_small_positive(v: f64) -> f64 {
    if v > std::f64::consts::PI {
        v - 2.0 * std::f64::consts::PI
    } else {
        v
    }
}

/// Assigns the new raw phases to the old continuous ones by minimal total
/// angular change and lifts them to the nearest branch.
fn follow(old: &[f64], raw: &[f64]) -> Vec<f64> {
    let lift = |o: f64, r: f64| {
        let d = (r - o).rem_euclid(2.0 * std::f64::consts::PI);
        let d = if d > std::f64::consts::PI { d - 2.0 * std::f64::consts::PI } else { d };
        (o + d, d.abs())
    };
    if old.len() == 1 {
        return vec![lift(old[0], raw[0]).0];
    }
    let (a0, c0) = lift(old[0], raw[0]);
    let (a1, c1) = lift(old[1], raw[1]);
    let (b0, d0) = lift(old[0], raw[1]);
    let (b1, d1) = lift(old[1], raw[0]);
    if c0 + c1 <= d0 + d1 {
        vec![a0, a1]
    } else {
        vec![b0, b1]
    }
}

fn w_eigenphases(x: &[Complex64], p: &[Complex64], n: usize) -> Result<Vec<f64>> {
    let i = Complex64::new(0.0, 1.0);
    let num: Vec<Complex64> = p.iter().zip(x).map(|(p, x)| p + i * x).collect();
    let den: Vec<Complex64> = p.iter().zip(x).map(|(p, x)| p - i * x).collect();
    if n == 1 {
        return Ok(vec![(num[0] / den[0]).arg()]);
    }
    let det = den[0] * den[3] - den[1] * den[2];
    if det.norm() == 0.0 {
        return Err(Error::Integrator { t: f64::NAN, message: "degenerate Lagrangian frame".into() });
    }
    let inv = [den[3] / det, -den[1] / det, -den[2] / det, den[0] / det];
    let w = [
        num[0] * inv[0] + num[1] * inv[2],
        num[0] * inv[1] + num[1] * inv[3],
        num[2] * inv[0] + num[3] * inv[2],
        num[2] * inv[1] + num[3] * inv[3],
    ];
    let tr = w[0] + w[3];
    let dt = w[0] * w[3] - w[1] * w[2];
    let disc = (tr * tr - 4.0 * dt).sqrt();
    Ok(vec![((tr + disc) / 2.0).arg(), ((tr - disc) / 2.0).arg()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ermakov::solve_ermakov;
    use crate::kernel::ModeKernel;
    use crate::system::{find_decoupling_angle, OscillatorSpec, DEFAULT_DECOUPLING_TOL};
    use crate::TimeFunction;
    use std::f64::consts::PI;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn mehler(omega: f64, t: f64, qf: f64, qi: f64) -> Complex64 {
        let s = (omega * t).sin();
        let amp = Complex64::new(omega / (2.0 * PI * s), 0.0).sqrt() * Complex64::from_polar(1.0, -PI / 4.0);
        amp * Complex64::from_polar(1.0, omega / (2.0 * s) * ((qf * qf + qi * qi) * (omega * t).cos() - 2.0 * qf * qi))
    }

    #[test]
    fn free_particle() {
        let zero = |_t: f64| 0.0;
        let h = ForcedMode { omega_sq: &zero, force: &zero };
        let vv = VanVleck::new(&h, 0.0, 1.7, 1.0).unwrap();
        let k = vv.eval(&[0.4], &[-1.1]).unwrap();
        let t: f64 = 1.7;
        let exact = Complex64::new(0.0, 2.0 * PI * t).inv().sqrt() * Complex64::from_polar(1.0, 1.5f64.powi(2) / (2.0 * t));
        assert!(rel(k, exact) < 1e-10, "{k} vs {exact}");
        assert_eq!(vv.maslov_index(), 0);
    }

    #[test]
    fn mehler_kernel_with_maslov() {
        let one = |_t: f64| 1.0;
        let zero = |_t: f64| 0.0;
        let h = ForcedMode { omega_sq: &one, force: &zero };
        for (t, nu) in [(1.0, 0), (2.5, 0), (3.5, 1), (7.0, 2)] {
            let vv = VanVleck::new(&h, 0.0, t, 1.0).unwrap();
            assert_eq!(vv.maslov_index(), nu, "T = {t}");
            let k = vv.eval(&[0.7], &[-0.2]).unwrap();
            let amp = (2.0 * PI * f64::sin(t).abs()).powf(-0.5);
            assert!((k.norm() - amp).abs() < 1e-9 * amp);
            if nu == 0 {
                assert!(rel(k, mehler(1.0, t, 0.7, -0.2)) < 1e-9);
            }
            let r = ErmakovRef::new(1.0, t);
            assert!(rel(k, r.eval(0.7, -0.2)) < 1e-9, "T = {t}");
        }
    }

    struct ErmakovRef(ModeKernel);

    impl ErmakovRef {
        fn new(omega_sq: f64, t: f64) -> Self {
            let w = move |_t: f64| omega_sq;
            let zero = |_t: f64| 0.0;
            let sol = solve_ermakov(&w, omega_sq.sqrt(), (0.0, t)).unwrap();
            Self(ModeKernel::new(&sol, &zero, 1.0).unwrap())
        }

        fn eval(&self, qf: f64, qi: f64) -> Complex64 {
            self.0.eval(qf, qi)
        }
    }

    #[test]
    fn driven_mode_matches_ermakov_kernel() {
        let one = |_t: f64| 1.0;
        let drive = |t: f64| t.sin();
        let h = ForcedMode { omega_sq: &one, force: &drive };
        let vv = VanVleck::new(&h, 0.0, 2.0, 1.0).unwrap();
        let sol = solve_ermakov(&one, 1.0, (0.0, 2.0)).unwrap();
        let mk = ModeKernel::new(&sol, &drive, 1.0).unwrap();
        for (qf, qi) in [(0.3, -0.4), (2.0, 1.0), (-1.5, 0.8)] {
            let a = vv.eval(&[qf], &[qi]).unwrap();
            let b = mk.eval(qf, qi);
            assert!(rel(a, b) < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn trajectory_invariants() {
        let w = |t: f64| 1.0 + 0.3 * t.sin();
        let drive = |t: f64| 0.5 * t.cos();
        let h = ForcedMode { omega_sq: &w, force: &drive };
        let vv = VanVleck::new(&h, 0.0, 2.0, 1.0).unwrap();
        let traj = vv.trajectory(&[0.8], &[-0.3]).unwrap();
        assert!(traj.boundary_residual < 1e-10);
        // |K| = (2πħ)^{-1/2} |∂x″/∂p′|^{-1/2}
        let k = vv.eval(&[0.8], &[-0.3]).unwrap();
        let expected = (2.0 * PI).powf(-0.5) * traj.stability[0].abs().powf(-0.5);
        assert!((k.norm() - expected).abs() < 1e-8 * expected);

        // first variation: S[q + εη] − S[q] = O(ε²)
        let action = |eps: f64| {
            let eta = |t: f64| (PI * t / 2.0).sin();
            let deta = |t: f64| PI / 2.0 * (PI * t / 2.0).cos();
            let lag = |t: f64| {
                let (x, p) = traj.state(t).unwrap();
                let q = x[0] + eps * eta(t);
                let qd = p[0] + eps * deta(t);
                0.5 * qd * qd - 0.5 * w(t) * q * q + drive(t) * q
            };
            crate::quad::integrate(lag, 0.0, 2.0, 1e-13).unwrap()
        };
        let s0 = action(0.0);
        assert!((s0 - traj.action).abs() < 1e-9);
        for eps in [1e-3, 1e-4] {
            let first = (action(eps) - action(-eps)) / (2.0 * eps);
            assert!(first.abs() < 1e-7, "ε = {eps}: {first}");
        }
    }

    #[test]
    fn coupled_system_matches_full_kernel() {
        let spec = SystemSpec::new(
            [
                OscillatorSpec::new(
                    "exp(0.1*t)".parse().unwrap(),
                    TimeFunction::from(1.0),
                    "0.2*sin(t)".parse().unwrap(),
                ),
                OscillatorSpec::new("2*exp(0.1*t)".parse().unwrap(), TimeFunction::from(2.0), TimeFunction::from(0.0)),
            ],
            "0.6*exp(0.1*t)".parse().unwrap(),
            1.0,
            (0.0, 4.0),
        )
        .unwrap();
        let dec = find_decoupling_angle(&spec, DEFAULT_DECOUPLING_TOL).unwrap();
        for t in [1.0, 2.0, 3.7] {
            let prop = crate::kernel::Propagator::build(&dec, 0.0, t).unwrap();
            let vv = VanVleck::new(&spec, 0.0, t, 1.0).unwrap();
            for (xf, xi) in [((0.3, -0.2), (0.5, 0.1)), ((-1.0, 0.7), (0.2, -0.9))] {
                let a = vv.eval(&[xf.0, xf.1], &[xi.0, xi.1]).unwrap();
                let b = prop.eval(xf, xi);
                assert!(rel(a, b) < 1e-7, "t = {t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn caustic_is_reported() {
        let one = |_t: f64| 1.0;
        let zero = |_t: f64| 0.0;
        let h = ForcedMode { omega_sq: &one, force: &zero };
        let vv = VanVleck::new(&h, 0.0, PI, 1.0).unwrap();
        assert!(matches!(vv.eval(&[0.1], &[0.2]), Err(Error::Caustic { .. })));
    }
}
