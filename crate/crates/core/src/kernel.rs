//! Closed-form propagators: one forced mode, and the full coupled pair.
//!
//! A single mode with auxiliary solution ρ, phase φ and drive G = Fρ has
//! the kernel
//!
//! ```text
//! K(Q″,Q′) = √(ω₀ / (2πiħ ρ″ρ′ sin φ))
//!          · exp{(i/2ħ)(ρ̇″Q″²/ρ″ − ρ̇′Q′²/ρ′)}
//!          · exp{(iω₀/2ħ sin φ)[(Q″²/ρ″² + Q′²/ρ′²) cos φ − 2Q″Q′/(ρ″ρ′)
//!                 + (2/ω₀)(Q″/ρ″) I₁ + (2/ω₀)(Q′/ρ′) I₂ − (2/ω₀²) I₃]}
//! ```
//!
//! which is a Gaussian in (Q″, Q′); we store it as
//! `P · exp(i[A Q″² + B Q′² + C Q″Q′ + D Q″ + E Q′ + F₀])`.
//!
//! The square root is taken on the continuous branch
//! `|…|^{1/2} · exp(−iπ/4 − i(π/2)⌊φ/π⌋)`: each focal point (φ = kπ)
//! crossed adds −π/2 to the phase of the prefactor.
//!
//! The full two-coordinate kernel multiplies the two mode kernels
//! (evaluated at the normal-mode coordinates of each endpoint) with the
//! measure factor `(m″m′)^{1/4}` and the boundary phase
//! `exp{−(i/4ħ)[ṁ(t″)x″² − ṁ(t′)x′²]}` per oscillator.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::ermakov::{default_omega0, solve_ermakov, ErmakovSolution};
use crate::error::{Error, Result};
use crate::ode::{self, Tolerances};
use crate::system::{DecoupledSystem, Profile};

/// Kernels closer to a focal point than this are reported as caustic.
pub const CAUSTIC_GUARD: f64 = 1e-10;

const DRIVE_TOLERANCES: Tolerances = Tolerances {
    rtol: 1e-12,
    atol: 1e-14,
    max_steps: 2_000_000,
    max_step: None,
};

/// The three drive integrals of a forced mode between `t′` and `t″`:
///
/// ```text
/// I₁ = ∫ G(t) sin φ(t,t′) dt
/// I₂ = ∫ G(t) sin φ(t″,t) dt
/// I₃ = ∫ dt ∫_{t′}^{t} dτ G(t)G(τ) sin φ(t″,t) sin φ(τ,t′)
/// ```
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DriveIntegrals {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
}

/// Drive integrals over the whole solved interval.
pub fn drive_integrals<P: Profile + ?Sized>(sol: &ErmakovSolution, force: &P) -> Result<DriveIntegrals> {
    let (a, b) = sol.interval();
    drive_integrals_between(sol, force, a, b)
}

/// Drive integrals from `t_a` to `t_b` (both within the solution).
///
/// With `a(t) = G sin φ(t,t_a)` and `b(t) = G cos φ(t,t_a)`, the integrals
/// reduce to one pass over `A′ = a, B′ = b, J′ = bA`:
/// `I₁ = A`, `I₂ = sin φ″ B − cos φ″ A`, `I₃ = sin φ″ J − cos φ″ A²/2`.
pub fn drive_integrals_between<P: Profile + ?Sized>(
    sol: &ErmakovSolution,
    force: &P,
    t_a: f64,
    t_b: f64,
) -> Result<DriveIntegrals> {
    let sa = sol.state(t_a)?;
    let sb = sol.state(t_b)?;
    if t_a == t_b {
        return Ok(DriveIntegrals::default());
    }
    let w0 = sol.omega0();
    // angle of (u, ω₀v) at t_a
    let (ca, sn_a) = (sa.u / sa.rho, w0 * sa.v / sa.rho);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let s = sol.state_unchecked(t);
        let f = force.value(t);
        // G sin φ(t,t_a) and G cos φ(t,t_a), with G = Fρ
        let a = f * (w0 * s.v * ca - s.u * sn_a);
        let b = f * (s.u * ca + w0 * s.v * sn_a);
        dy[0] = a;
        dy[1] = b;
        dy[2] = b * y[0];
    };
    let dense = ode::integrate(rhs, t_a, &[0.0; 3], t_b, &DRIVE_TOLERANCES)?;
    let [big_a, big_b, j] = [dense.final_state()[0], dense.final_state()[1], dense.final_state()[2]];
    let phi = sb.phase - sa.phase;
    let (s, c) = phi.sin_cos();
    Ok(DriveIntegrals {
        i1: big_a,
        i2: s * big_b - c * big_a,
        i3: s * j - c * big_a * big_a / 2.0,
    })
}

/// Branch data of one mode: accumulated phase and number of focal points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub phase: f64,
    pub maslov_index: i64,
}

impl Branch {
    pub fn new(phase: f64) -> Self {
        Self { phase, maslov_index: (phase / PI).floor() as i64 }
    }
}

/// A kernel value with the branch data of each mode involved.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexKernel {
    pub value: Complex64,
    pub branches: Vec<Branch>,
}

impl ComplexKernel {
    pub fn maslov_indices(&self) -> Vec<i64> {
        self.branches.iter().map(|b| b.maslov_index).collect()
    }
}

/// Prefactor `√(ω₀/(2πiħ ρ″ρ′ sin φ))` on the continuous branch.
pub fn prefactor(omega0: f64, hbar: f64, rho_f: f64, rho_i: f64, phase: f64) -> Complex64 {
    let modulus = (omega0 / (2.0 * PI * hbar * rho_f * rho_i * phase.sin().abs())).sqrt();
    let arg = -FRAC_PI_4 - FRAC_PI_2 * (phase / PI).floor();
    Complex64::from_polar(modulus, arg)
}

/// The kernel of one forced mode between two fixed times, reduced to its
/// Gaussian coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeKernel {
    pub omega0: f64,
    pub hbar: f64,
    pub rho_f: f64,
    pub rho_i: f64,
    pub rho_dot_f: f64,
    pub rho_dot_i: f64,
    pub branch: Branch,
    pub drive: DriveIntegrals,
    amplitude: Complex64,
    // exponent i(a Q″² + b Q′² + c Q″Q′ + d Q″ + e Q′ + f0)
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f0: f64,
}

impl ModeKernel {
    /// Kernel over the whole solved interval.
    pub fn new<P: Profile + ?Sized>(sol: &ErmakovSolution, force: &P, hbar: f64) -> Result<Self> {
        let (a, b) = sol.interval();
        Self::between(sol, force, a, b, hbar)
    }

    /// Kernel from `t_i` to `t_f`, both inside the solved interval. The
    /// auxiliary solution need not be normalised at `t_i`.
    pub fn between<P: Profile + ?Sized>(sol: &ErmakovSolution, force: &P, t_i: f64, t_f: f64, hbar: f64) -> Result<Self> {
        let si = sol.state(t_i)?;
        let sf = sol.state(t_f)?;
        let phase = sf.phase - si.phase;
        let sin = phase.sin();
        if sin.abs() <= CAUSTIC_GUARD {
            return Err(Error::Caustic { phase });
        }
        let drive = drive_integrals_between(sol, force, t_i, t_f)?;
        let w0 = sol.omega0();
        let kappa = w0 / (2.0 * hbar * sin);
        let cos = phase.cos();
        Ok(Self {
            omega0: w0,
            hbar,
            rho_f: sf.rho,
            rho_i: si.rho,
            rho_dot_f: sf.rho_dot,
            rho_dot_i: si.rho_dot,
            branch: Branch::new(phase),
            drive,
            amplitude: prefactor(w0, hbar, sf.rho, si.rho, phase),
            a: sf.rho_dot / (2.0 * hbar * sf.rho) + kappa * cos / (sf.rho * sf.rho),
            b: -si.rho_dot / (2.0 * hbar * si.rho) + kappa * cos / (si.rho * si.rho),
            c: -2.0 * kappa / (sf.rho * si.rho),
            d: kappa * (2.0 / w0) * drive.i1 / sf.rho,
            e: kappa * (2.0 / w0) * drive.i2 / si.rho,
            f0: -kappa * (2.0 / (w0 * w0)) * drive.i3,
        })
    }

    pub fn phase(&self) -> f64 {
        self.branch.phase
    }

    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    /// Exponent coefficients `(A, B, C, D, E, F₀)`.
    pub fn coefficients(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f0]
    }

    pub fn exponent(&self, q_f: f64, q_i: f64) -> f64 {
        self.a * q_f * q_f + self.b * q_i * q_i + self.c * q_f * q_i + self.d * q_f + self.e * q_i + self.f0
    }

    pub fn eval(&self, q_f: f64, q_i: f64) -> Complex64 {
        self.amplitude * Complex64::from_polar(1.0, self.exponent(q_f, q_i))
    }

    /// Analytic continuation to complex coordinates.
    pub fn eval_complex(&self, q_f: Complex64, q_i: Complex64) -> Complex64 {
        let expo = q_f * q_f * self.a + q_i * q_i * self.b + q_f * q_i * self.c + q_f * self.d + q_i * self.e + self.f0;
        self.amplitude * (Complex64::i() * expo).exp()
    }

    pub fn kernel(&self, q_f: f64, q_i: f64) -> ComplexKernel {
        ComplexKernel { value: self.eval(q_f, q_i), branches: vec![self.branch] }
    }
}

/// Single-mode kernel at one pair of endpoints.
pub fn mode_kernel<P: Profile + ?Sized>(
    sol: &ErmakovSolution,
    force: &P,
    q_f: f64,
    q_i: f64,
    hbar: f64,
) -> Result<ComplexKernel> {
    Ok(ModeKernel::new(sol, force, hbar)?.kernel(q_f, q_i))
}

/// The full propagator of the coupled pair between two fixed times.
#[derive(Debug, Clone)]
pub struct Propagator {
    dec: DecoupledSystem,
    t_i: f64,
    t_f: f64,
    modes: [ModeKernel; 2],
    mass_i: [f64; 2],
    mass_f: [f64; 2],
    mdot_i: [f64; 2],
    mdot_f: [f64; 2],
    measure: f64,
}

/// Solve the auxiliary equation of both modes over `[t_i, t_f]` with the
/// default gauge frequencies multiplied by `gauge_scale`.
pub fn solve_modes(dec: &DecoupledSystem, t_i: f64, t_f: f64, gauge_scale: [f64; 2]) -> Result<[ErmakovSolution; 2]> {
    let solve = |j: usize| {
        let profile = dec.omega_sq_profile(j);
        let w0 = default_omega0(profile.value(t_i)) * gauge_scale[j];
        solve_ermakov(&profile, w0, (t_i, t_f))
    };
    let (a, b) = rayon::join(|| solve(0), || solve(1));
    Ok([a?, b?])
}

impl Propagator {
    /// Assemble the propagator from prepared auxiliary solutions. Both
    /// solutions must cover `[t_i, t_f]`.
    pub fn new(dec: &DecoupledSystem, sols: [&ErmakovSolution; 2], t_i: f64, t_f: f64) -> Result<Self> {
        dec.ensure_decoupled()?;
        let hbar = dec.spec().hbar();
        let mode = |j: usize| ModeKernel::between(sols[j], &dec.force_profile(j), t_i, t_f, hbar);
        let modes = [mode(0)?, mode(1)?];
        let spec = dec.spec();
        let jet = |j: usize, t: f64| spec.mass_jet(j, t);
        let (ji, jf) = ([jet(0, t_i), jet(1, t_i)], [jet(0, t_f), jet(1, t_f)]);
        let measure = (0..2).map(|j| (jf[j].value * ji[j].value).powf(0.25)).product();
        Ok(Self {
            dec: dec.clone(),
            t_i,
            t_f,
            modes,
            mass_i: [ji[0].value, ji[1].value],
            mass_f: [jf[0].value, jf[1].value],
            mdot_i: [ji[0].d1, ji[1].d1],
            mdot_f: [jf[0].d1, jf[1].d1],
            measure,
        })
    }

    /// Solve everything needed for the propagator from `t_i` to `t_f`.
    pub fn build(dec: &DecoupledSystem, t_i: f64, t_f: f64) -> Result<Self> {
        Self::build_with_gauge(dec, t_i, t_f, [1.0, 1.0])
    }

    pub fn build_with_gauge(dec: &DecoupledSystem, t_i: f64, t_f: f64, gauge_scale: [f64; 2]) -> Result<Self> {
        dec.ensure_decoupled()?;
        let sols = solve_modes(dec, t_i, t_f, gauge_scale)?;
        Self::new(dec, [&sols[0], &sols[1]], t_i, t_f)
    }

    pub fn decoupled(&self) -> &DecoupledSystem {
        &self.dec
    }

    pub fn times(&self) -> (f64, f64) {
        (self.t_i, self.t_f)
    }

    pub fn mode(&self, j: usize) -> &ModeKernel {
        &self.modes[j]
    }

    pub fn hbar(&self) -> f64 {
        self.dec.spec().hbar()
    }

    /// `Π_j (m_j″ m_j′)^{1/4}`
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Boundary phase angle `−(1/4ħ) Σ_j [ṁ_j(t″) x_j″² − ṁ_j(t′) x_j′²]`.
    pub fn boundary_phase(&self, x_f: (f64, f64), x_i: (f64, f64)) -> f64 {
        let (xf, xi) = ([x_f.0, x_f.1], [x_i.0, x_i.1]);
        let sum: f64 = (0..2)
            .map(|j| self.mdot_f[j] * xf[j] * xf[j] - self.mdot_i[j] * xi[j] * xi[j])
            .sum();
        -sum / (4.0 * self.hbar())
    }

    /// Boundary phase of a single endpoint (`final = true` for t″).
    pub fn endpoint_phase(&self, x: (f64, f64), final_time: bool) -> f64 {
        let (m, sign) = if final_time { (self.mdot_f, -1.0) } else { (self.mdot_i, 1.0) };
        sign * (m[0] * x.0 * x.0 + m[1] * x.1 * x.1) / (4.0 * self.hbar())
    }

    pub fn to_modes(&self, x: (f64, f64), final_time: bool) -> (f64, f64) {
        self.dec.normal_mode_coordinates(x, if final_time { self.t_f } else { self.t_i })
    }

    pub fn eval(&self, x_f: (f64, f64), x_i: (f64, f64)) -> Complex64 {
        let qf = self.to_modes(x_f, true);
        let qi = self.to_modes(x_i, false);
        let k = self.modes[0].eval(qf.0, qi.0) * self.modes[1].eval(qf.1, qi.1);
        k * self.measure * Complex64::from_polar(1.0, self.boundary_phase(x_f, x_i))
    }

    pub fn kernel(&self, x_f: (f64, f64), x_i: (f64, f64)) -> ComplexKernel {
        ComplexKernel {
            value: self.eval(x_f, x_i),
            branches: vec![self.modes[0].branch, self.modes[1].branch],
        }
    }

    /// The same kernel written with `σ_j = ρ_j/√m_j` in place of the mass
    /// boundary phase. Valid whenever `ṁ₁/m₁ = ṁ₂/m₂` at both endpoints
    /// (a common exponential mass rate is the canonical example).
    pub fn sigma_form(&self, x_f: (f64, f64), x_i: (f64, f64)) -> Result<Complex64> {
        let common = |m: [f64; 2], md: [f64; 2]| {
            let (r1, r2) = (md[0] / m[0], md[1] / m[1]);
            (r1 - r2).abs() <= 1e-12 * r1.abs().max(r2.abs()).max(1.0)
        };
        if !(common(self.mass_f, self.mdot_f) && common(self.mass_i, self.mdot_i)) {
            return Err(Error::InvalidSpec("sigma form needs a common mass growth rate".into()));
        }
        let hbar = self.hbar();
        let qf = self.to_modes(x_f, true);
        let qi = self.to_modes(x_i, false);
        let mut total = Complex64::new(1.0, 0.0);
        for (j, (q2, q1)) in [(qf.0, qi.0), (qf.1, qi.1)].into_iter().enumerate() {
            let m = &self.modes[j];
            let (mf, mi) = (self.mass_f[j], self.mass_i[j]);
            let (sf, si) = (m.rho_f / mf.sqrt(), m.rho_i / mi.sqrt());
            let sdot = |rho: f64, rho_dot: f64, mass: f64, mdot: f64| {
                rho_dot / mass.sqrt() - 0.5 * rho * mdot / mass.powf(1.5)
            };
            let (sdf, sdi) = (sdot(m.rho_f, m.rho_dot_f, mf, self.mdot_f[j]), sdot(m.rho_i, m.rho_dot_i, mi, self.mdot_i[j]));
            let phi = m.branch.phase;
            let w0 = m.omega0;
            let pre = prefactor(w0, hbar, sf, si, phi);
            let boundary = (sdf / sf * q2 * q2 - sdi / si * q1 * q1) / (2.0 * hbar);
            let bracket = (q2 * q2 / (mf * sf * sf) + q1 * q1 / (mi * si * si)) * phi.cos()
                - 2.0 * q2 * q1 / ((mf * mi).sqrt() * sf * si)
                + 2.0 / w0 * q2 / (mf.sqrt() * sf) * m.drive.i1
                + 2.0 / w0 * q1 / (mi.sqrt() * si) * m.drive.i2
                - 2.0 / (w0 * w0) * m.drive.i3;
            let expo = boundary + w0 / (2.0 * hbar * phi.sin()) * bracket;
            total *= pre * Complex64::from_polar(1.0, expo);
        }
        Ok(total)
    }

    /// The uncoupled product form written directly in lab coordinates
    /// (requires α = 0).
    pub fn uncoupled_form(&self, x_f: (f64, f64), x_i: (f64, f64)) -> Result<Complex64> {
        if self.dec.alpha() != 0.0 {
            return Err(Error::InvalidSpec("the uncoupled form needs a zero rotation angle".into()));
        }
        let hbar = self.hbar();
        let mut total = Complex64::new(1.0, 0.0);
        for (j, (x2, x1)) in [(x_f.0, x_i.0), (x_f.1, x_i.1)].into_iter().enumerate() {
            let m = &self.modes[j];
            let (mf, mi) = (self.mass_f[j], self.mass_i[j]);
            let (sf, si) = (m.rho_f / mf.sqrt(), m.rho_i / mi.sqrt());
            let sdf = m.rho_dot_f / mf.sqrt() - 0.5 * m.rho_f * self.mdot_f[j] / mf.powf(1.5);
            let sdi = m.rho_dot_i / mi.sqrt() - 0.5 * m.rho_i * self.mdot_i[j] / mi.powf(1.5);
            let (phi, w0) = (m.branch.phase, m.omega0);
            let pre = prefactor(w0, hbar, sf, si, phi);
            let boundary = (mf * sdf / sf * x2 * x2 - mi * sdi / si * x1 * x1) / (2.0 * hbar);
            let bracket = (x2 * x2 / (sf * sf) + x1 * x1 / (si * si)) * phi.cos() - 2.0 * x2 * x1 / (sf * si)
                + 2.0 / w0 * x2 / sf * m.drive.i1
                + 2.0 / w0 * x1 / si * m.drive.i2
                - 2.0 / (w0 * w0) * m.drive.i3;
            total *= pre * Complex64::from_polar(1.0, boundary + w0 / (2.0 * hbar * phi.sin()) * bracket);
        }
        Ok(total)
    }
}

/// Full kernel over the system's own interval, from prepared solutions.
pub fn full_kernel(
    dec: &DecoupledSystem,
    sols: [&ErmakovSolution; 2],
    x_f: (f64, f64),
    x_i: (f64, f64),
) -> Result<ComplexKernel> {
    let (t_i, t_f) = dec.spec().interval();
    Ok(Propagator::new(dec, sols, t_i, t_f)?.kernel(x_f, x_i))
}

/// One entry of a kernel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSample {
    pub x_f: (f64, f64),
    pub x_i: (f64, f64),
    pub kernel: ComplexKernel,
}

/// Evaluate the propagator on every combination of final points
/// `(x₁″, x₂″)` (row-major: x₁″ outer) and initial points. Output order is
/// deterministic regardless of the thread count.
pub fn kernel_grid(prop: &Propagator, x1_f: &[f64], x2_f: &[f64], initial: &[(f64, f64)]) -> Vec<KernelSample> {
    let n2 = x2_f.len();
    let ni = initial.len();
    (0..x1_f.len() * n2 * ni)
        .into_par_iter()
        .map(|idx| {
            let (row, k) = (idx / ni, idx % ni);
            let x_f = (x1_f[row / n2], x2_f[row % n2]);
            KernelSample { x_f, x_i: initial[k], kernel: prop.kernel(x_f, initial[k]) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ermakov::solve_ermakov;
    use crate::quad;
    use crate::system::{find_decoupling_angle, OscillatorSpec, SystemSpec, DEFAULT_DECOUPLING_TOL};
    use crate::timefn::parse;

    fn constant(w2: f64) -> impl Profile {
        move |_t: f64| w2
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm()
    }

    /// Textbook constant-frequency kernel with m = 1.
    fn mehler(w: f64, hbar: f64, t: f64, xf: f64, xi: f64) -> Complex64 {
        let s = (w * t).sin();
        let pre = prefactor(w, hbar, 1.0, 1.0, w * t);
        pre * Complex64::from_polar(1.0, w / (2.0 * hbar * s) * ((xf * xf + xi * xi) * (w * t).cos() - 2.0 * xf * xi))
    }

    #[test]
    fn origin_value_at_quarter_period() {
        let sol = solve_ermakov(&constant(1.0), 1.0, (0.0, FRAC_PI_2)).unwrap();
        let k = mode_kernel(&sol, &constant(0.0), 0.0, 0.0, 1.0).unwrap();
        let expected = Complex64::from_polar((2.0 * PI).powf(-0.5), -FRAC_PI_4);
        assert!(close(k.value, expected, 1e-12), "{}", k.value);
        let k = mode_kernel(&sol, &constant(0.0), 1.0, 0.0, 1.0).unwrap();
        assert!(close(k.value, expected, 1e-10), "{}", k.value);
        assert_eq!(k.branches[0].maslov_index, 0);
    }

    #[test]
    fn reduces_to_mehler_kernel() {
        for (t, hbar) in [(0.3, 1.0), (1.0, 0.5), (2.5, 1.0), (3.5, 1.0), (7.0, 2.0)] {
            let sol = solve_ermakov(&constant(1.0), 1.0, (0.0, t)).unwrap();
            let mk = ModeKernel::new(&sol, &constant(0.0), hbar).unwrap();
            for (xf, xi) in [(0.3, -1.2), (2.0, 0.5), (-1.5, -1.5)] {
                assert!(close(mk.eval(xf, xi), mehler(1.0, hbar, t, xf, xi), 1e-10), "t = {t}");
            }
        }
    }

    #[test]
    fn maslov_index_counts_focal_points() {
        let sol = solve_ermakov(&constant(1.0), 1.0, (0.0, 3.5)).unwrap();
        let mk = ModeKernel::new(&sol, &constant(0.0), 1.0).unwrap();
        assert_eq!(mk.branch.maslov_index, 1);
        // the prefactor picks up −π/2 past the focal point
        let arg = mk.amplitude().arg();
        assert!((arg - (-3.0 * FRAC_PI_4)).abs() < 1e-12);
    }

    #[test]
    fn caustic_is_reported() {
        let sol = solve_ermakov(&constant(1.0), 1.0, (0.0, PI)).unwrap();
        assert!(matches!(ModeKernel::new(&sol, &constant(0.0), 1.0), Err(Error::Caustic { .. })));
    }

    #[test]
    fn free_particle_limit() {
        for t in [0.5, 1.0, 3.0] {
            let sol = solve_ermakov(&constant(0.0), 1.0, (0.0, t)).unwrap();
            let mk = ModeKernel::new(&sol, &constant(0.0), 1.0).unwrap();
            for (xf, xi) in [(0.0, 0.0), (1.0, -0.4), (2.5, 1.0)] {
                let exact = Complex64::from_polar((2.0 * PI * t).powf(-0.5), -FRAC_PI_4 + (xf - xi) * (xf - xi) / (2.0 * t));
                assert!(close(mk.eval(xf, xi), exact, 1e-9));
            }
        }
    }

    #[test]
    fn drive_integral_examples() {
        let sol = solve_ermakov(&constant(1.0), 1.0, (0.0, PI)).unwrap();
        let zero = drive_integrals(&sol, &constant(0.0)).unwrap();
        assert_eq!(zero, DriveIntegrals::default());
        let d = drive_integrals(&sol, &constant(1.0)).unwrap();
        assert!((d.i1 - 2.0).abs() < 1e-10, "{}", d.i1);
        assert!((d.i2 - 2.0).abs() < 1e-10, "{}", d.i2);
        // ∫₀^π sin t (1 − cos t) dt = 2
        assert!((d.i3 - 2.0).abs() < 1e-10, "{}", d.i3);
        // brute-force trapezoid on the triangle
        let n = 800;
        let h = PI / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let t = i as f64 * h;
            let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
            let mut inner = 0.0;
            for k in 0..=i {
                let tau = k as f64 * h;
                let wk = if k == 0 || k == i { 0.5 } else { 1.0 };
                inner += wk * tau.sin();
            }
            s += wi * (PI - t).sin() * inner * h;
        }
        assert!((s * h - d.i3).abs() < 1e-4);
    }

    #[test]
    fn double_integral_matches_nested_gauss() {
        let w2 = |t: f64| 1.0 + 0.3 * (1.1 * t).sin();
        let f = |t: f64| (2.0 * t).cos() + 0.2 * t;
        let sol = solve_ermakov(&w2, 1.2, (0.0, 2.5)).unwrap();
        let d = drive_integrals(&sol, &f).unwrap();
        let total = sol.total_phase();
        let g = |t: f64| f(t) * sol.rho(t).unwrap();
        let phi = |t: f64| sol.phase_at(t).unwrap();
        let i1 = quad::composite_gauss(|t| g(t) * phi(t).sin(), 0.0, 2.5, 40, 10);
        let i2 = quad::composite_gauss(|t| g(t) * (total - phi(t)).sin(), 0.0, 2.5, 40, 10);
        let i3 = quad::composite_gauss(
            |t| {
                let inner = quad::composite_gauss(|tau| g(tau) * phi(tau).sin(), 0.0, t, 8, 10);
                g(t) * (total - phi(t)).sin() * inner
            },
            0.0,
            2.5,
            20,
            10,
        );
        assert!((d.i1 - i1).abs() < 1e-8);
        assert!((d.i2 - i2).abs() < 1e-8);
        assert!((d.i3 - i3).abs() < 1e-8, "{} vs {}", d.i3, i3);
    }

    fn bose_system() -> DecoupledSystem {
        let osc = |m: &str, w: f64, f: &str| OscillatorSpec::new(parse(m).unwrap(), w.into(), parse(f).unwrap());
        let spec = SystemSpec::new(
            [osc("exp(0.1*t)", 1.0, "0.2*sin(t)"), osc("2*exp(0.1*t)", 2.0, "0")],
            parse("0.3*2*exp(0.1*t)").unwrap(),
            1.0,
            (0.0, 2.0),
        )
        .unwrap();
        find_decoupling_angle(&spec, DEFAULT_DECOUPLING_TOL).unwrap()
    }

    #[test]
    fn sigma_form_agrees_with_full_kernel() {
        let dec = bose_system();
        let prop = Propagator::build(&dec, 0.0, 2.0).unwrap();
        for (xf, xi) in [((0.3, -0.5), (1.0, 0.2)), ((-1.0, 0.7), (0.0, 0.0)), ((2.0, 1.5), (-1.2, 0.4))] {
            let a = prop.eval(xf, xi);
            let b = prop.sigma_form(xf, xi).unwrap();
            assert!(close(a, b, 1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn gauge_choice_does_not_change_kernel() {
        let dec = bose_system();
        let base = Propagator::build(&dec, 0.0, 2.0).unwrap();
        for scale in [[0.5, 2.0], [2.0, 0.5], [0.5, 0.5]] {
            let other = Propagator::build_with_gauge(&dec, 0.0, 2.0, scale).unwrap();
            for (xf, xi) in [((0.3, -0.5), (1.0, 0.2)), ((1.5, 0.7), (-0.3, -0.9))] {
                assert!(close(other.eval(xf, xi), base.eval(xf, xi), 1e-8));
            }
        }
    }

    #[test]
    fn uncoupled_product_form() {
        let osc = |m: &str, w: &str, f: &str| OscillatorSpec::new(parse(m).unwrap(), parse(w).unwrap(), parse(f).unwrap());
        let spec = SystemSpec::new(
            [osc("1 + 0.1*t^2", "1", "sin(t)"), osc("2*exp(0.2*t)", "1.5 + 0.1*t", "0.3")],
            0.0.into(),
            1.0,
            (0.0, 1.5),
        )
        .unwrap();
        let dec = find_decoupling_angle(&spec, DEFAULT_DECOUPLING_TOL).unwrap();
        let prop = Propagator::build(&dec, 0.0, 1.5).unwrap();
        for (xf, xi) in [((0.3, -0.5), (1.0, 0.2)), ((1.5, 0.7), (-0.3, -0.9))] {
            let a = prop.eval(xf, xi);
            let b = prop.uncoupled_form(xf, xi).unwrap();
            assert!(close(a, b, 1e-12), "{a} vs {b}");
            // and equals the product of two one-dimensional kernels
            let m0 = prop.mode(0).eval(spec.mass(0, 1.5).sqrt() * xf.0, xi.0);
            let m1 = prop.mode(1).eval((spec.mass(1, 1.5)).sqrt() * xf.1, 2f64.sqrt() * xi.1);
            let prod = m0 * m1 * prop.measure() * Complex64::from_polar(1.0, prop.boundary_phase(xf, xi));
            assert!(close(a, prod, 1e-12));
        }
    }

    #[test]
    fn reversed_kernel_is_conjugate() {
        let dec = bose_system();
        let fwd = Propagator::build(&dec, 0.0, 2.0).unwrap();
        let bwd = Propagator::build(&dec, 2.0, 0.0).unwrap();
        for (xf, xi) in [((0.3, -0.5), (1.0, 0.2)), ((1.5, 0.7), (-0.3, -0.9))] {
            assert!(close(fwd.eval(xf, xi), bwd.eval(xi, xf).conj(), 1e-9));
        }
    }

    #[test]
    fn time_symmetric_kernel_is_symmetric() {
        // constant coefficients: K(x″, x′) = K(x′, x″)
        let spec = SystemSpec::new(
            [OscillatorSpec::harmonic(1.0), OscillatorSpec::harmonic(1.7)],
            0.4.into(),
            1.0,
            (0.0, 1.3),
        )
        .unwrap();
        let dec = find_decoupling_angle(&spec, DEFAULT_DECOUPLING_TOL).unwrap();
        let prop = Propagator::build(&dec, 0.0, 1.3).unwrap();
        let xs = [-1.0, 0.5];
        let initial = [(0.2, -0.3), (1.1, 0.4)];
        let grid = kernel_grid(&prop, &xs, &xs, &initial);
        assert_eq!(grid.len(), 8);
        assert_eq!(grid[1].x_f, (-1.0, -1.0));
        assert_eq!(grid[2].x_f, (-1.0, 0.5));
        for s in &grid {
            let swapped = prop.eval(s.x_i, s.x_f);
            assert!(close(s.kernel.value, swapped, 1e-12));
        }
    }

    #[test]
    fn complex_evaluation_continues_real_values() {
        let sol = solve_ermakov(&(|t: f64| 1.0 + 0.2 * t), 1.0, (0.0, 1.0)).unwrap();
        let mk = ModeKernel::new(&sol, &(|t: f64| t.sin()), 1.0).unwrap();
        let a = mk.eval(0.7, -0.2);
        let b = mk.eval_complex(Complex64::new(0.7, 0.0), Complex64::new(-0.2, 0.0));
        assert!(close(a, b, 1e-14));
    }

    #[test]
    fn semigroup_on_rotated_contour() {
        // ∫ K(x″,t″;y,t) K(y,t;x′,t′) dy = K(x″,t″;x′,t′) along y = s·e^{iθ}
        let w2 = |t: f64| 1.0 + 0.3 * t.sin();
        let f = |t: f64| 0.5 * (2.0 * t).cos();
        let sol = solve_ermakov(&w2, 1.0, (0.0, 2.0)).unwrap();
        let k1 = ModeKernel::between(&sol, &f, 0.0, 0.8, 1.0).unwrap();
        let k2 = ModeKernel::between(&sol, &f, 0.8, 2.0, 1.0).unwrap();
        let k = ModeKernel::between(&sol, &f, 0.0, 2.0, 1.0).unwrap();
        // choose the rotation that makes the combined quadratic coefficient decay
        let quad_coef = k1.coefficients()[0] + k2.coefficients()[1];
        let theta = if quad_coef > 0.0 { PI / 8.0 } else { -PI / 8.0 };
        let dir = Complex64::from_polar(1.0, theta);
        let (xf, xi) = (0.4, -0.9);
        let (nodes, weights) = quad::gauss_legendre(40);
        let mut sum = Complex64::new(0.0, 0.0);
        let (lo, hi, panels) = (-14.0, 14.0, 40);
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let c = lo + (p as f64 + 0.5) * h;
            for (x, w) in nodes.iter().zip(&weights) {
                let y = dir * (c + 0.5 * h * x);
                sum += k2.eval_complex(Complex64::new(xf, 0.0), y) * k1.eval_complex(y, Complex64::new(xi, 0.0)) * (w * 0.5 * h);
            }
        }
        sum *= dir;
        assert!(close(sum, k.eval(xf, xi), 1e-10), "{sum} vs {}", k.eval(xf, xi));
    }
}
