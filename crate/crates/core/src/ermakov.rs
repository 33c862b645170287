//! Auxiliary-equation solver for a single normal mode.
//!
//! For a mode with frequency `Ω²(t)` we need a positive solution of
//!
//! ```text
//! ρ̈ + Ω²(t) ρ = ω₀² / ρ³
//! ```
//!
//! and the rescaled time `φ(t) = ω₀ ∫ dt / ρ²`. Rather than integrating the
//! nonlinear equation (stiff where ρ is small) we integrate the linear
//! equation `ü + Ω²u = 0` for the two fundamental solutions
//! `u(t′)=1, u̇(t′)=0` and `v(t′)=0, v̇(t′)=1` and form
//!
//! ```text
//! ρ = √(u² + ω₀²v²),   φ = arg(u + iω₀v)
//! ```
//!
//! Both identities are exact because the Wronskian `uv̇ − u̇v` is 1. The
//! argument is unwrapped continuously along the dense output, so φ is the
//! accumulated phase including every crossing of a multiple of π.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ode::{self, DenseSolution, StepStats, Tolerances};
use crate::quad;
use crate::system::Profile;
use crate::timefn::table::fornberg_weights;

/// Integration tolerances used unless the caller supplies its own.
pub const DEFAULT_TOLERANCES: Tolerances = Tolerances {
    rtol: 1e-13,
    atol: 1e-15,
    max_steps: 2_000_000,
    max_step: None,
};

const RHO_FLOOR: f64 = 1e-12;
// Phase reference points per accepted step.
const PHASE_SUBSAMPLES: usize = 8;

/// Default gauge frequency: `Ω(t′)` when it is not tiny, else 1.
pub fn default_omega0(omega_sq_at_start: f64) -> f64 {
    if omega_sq_at_start > 1e-12 {
        omega_sq_at_start.sqrt()
    } else {
        1.0
    }
}

/// Full state of the auxiliary solution at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErmakovState {
    pub t: f64,
    pub u: f64,
    pub du: f64,
    pub v: f64,
    pub dv: f64,
    pub rho: f64,
    pub rho_dot: f64,
    /// `φ(t′ → t)`
    pub phase: f64,
}

impl ErmakovState {
    pub fn wronskian(&self) -> f64 {
        self.u * self.dv - self.du * self.v
    }
}

#[derive(Debug, Clone)]
pub struct ErmakovSolution {
    omega0: f64,
    dense: DenseSolution,
    // (t, unwrapped phase) in the direction of integration
    phase_times: Vec<f64>,
    phase_values: Vec<f64>,
}

fn linear_rhs<P: Profile + ?Sized>(omega_sq: &P) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
    move |t, y, dy| {
        let w2 = omega_sq.value(t);
        dy[0] = y[1];
        dy[1] = -w2 * y[0];
        dy[2] = y[3];
        dy[3] = -w2 * y[2];
    }
}

/// Solve the auxiliary equation on `[start, end]` (backwards when
/// `end < start`) with `ρ(start) = 1`, `ρ̇(start) = 0`.
pub fn solve_ermakov<P: Profile + ?Sized>(omega_sq: &P, omega0: f64, interval: (f64, f64)) -> Result<ErmakovSolution> {
    solve_ermakov_with(omega_sq, omega0, interval, &DEFAULT_TOLERANCES)
}

pub fn solve_ermakov_with<P: Profile + ?Sized>(
    omega_sq: &P,
    omega0: f64,
    interval: (f64, f64),
    tol: &Tolerances,
) -> Result<ErmakovSolution> {
    if !(omega0.is_finite() && omega0 > 0.0) {
        return Err(Error::InvalidSpec(format!("gauge frequency must be positive, got {omega0}")));
    }
    let (start, end) = interval;
    if !(start.is_finite() && end.is_finite()) {
        return Err(Error::InvalidSpec("non-finite interval".into()));
    }
    let dense = ode::integrate(linear_rhs(omega_sq), start, &[1.0, 0.0, 0.0, 1.0], end, tol)?;

    let mut sol = ErmakovSolution {
        omega0,
        dense,
        phase_times: Vec::new(),
        phase_values: Vec::new(),
    };
    sol.unwrap_phase()?;
    Ok(sol)
}

impl ErmakovSolution {
    fn unwrap_phase(&mut self) -> Result<()> {
        let nodes = self.dense.nodes().to_vec();
        let mut buf = [0.0; 4];
        let mut last = 0.0;
        self.phase_times.push(nodes[0]);
        self.phase_values.push(0.0);
        for w in nodes.windows(2) {
            for s in 1..=PHASE_SUBSAMPLES {
                let t = if s == PHASE_SUBSAMPLES {
                    w[1]
                } else {
                    w[0] + (w[1] - w[0]) * s as f64 / PHASE_SUBSAMPLES as f64
                };
                self.dense.eval_into(t, &mut buf);
                let rho = (buf[0] * buf[0] + self.omega0 * self.omega0 * buf[2] * buf[2]).sqrt();
                if !(rho > RHO_FLOOR) {
                    return Err(Error::Integrator {
                        t,
                        message: format!("auxiliary amplitude collapsed (rho = {rho:e})"),
                    });
                }
                let raw = (self.omega0 * buf[2]).atan2(buf[0]);
                let phase = raw + 2.0 * PI * ((last - raw) / (2.0 * PI)).round();
                self.phase_times.push(t);
                self.phase_values.push(phase);
                last = phase;
            }
        }
        Ok(())
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// `(t′, t″)` in the order of integration.
    pub fn interval(&self) -> (f64, f64) {
        (self.dense.start(), self.dense.end())
    }

    pub fn stats(&self) -> StepStats {
        self.dense.stats()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.dense.contains(t)
    }

    fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            let (a, b) = self.interval();
            Err(Error::OutOfDomain { t, start: a.min(b), end: a.max(b) })
        }
    }

    /// State at `t`. The endpoints return the integrator's node values.
    pub fn state(&self, t: f64) -> Result<ErmakovState> {
        self.check(t)?;
        Ok(self.state_unchecked(t))
    }

    pub(crate) fn state_unchecked(&self, t: f64) -> ErmakovState {
        let mut y = [0.0; 4];
        if t == self.dense.end() {
            y.copy_from_slice(self.dense.final_state());
        } else if t == self.dense.start() {
            y.copy_from_slice(self.dense.node_state(0));
        } else {
            self.dense.eval_into(t, &mut y);
        }
        let [u, du, v, dv] = y;
        let w2 = self.omega0 * self.omega0;
        let rho = (u * u + w2 * v * v).sqrt();
        let rho_dot = (u * du + w2 * v * dv) / rho;
        ErmakovState {
            t,
            u,
            du,
            v,
            dv,
            rho,
            rho_dot,
            phase: self.unwrapped(t, (self.omega0 * v).atan2(u)),
        }
    }

    fn unwrapped(&self, t: f64, raw: f64) -> f64 {
        let fwd = self.dense.end() >= self.dense.start();
        let k = self.phase_times.partition_point(|&s| if fwd { s <= t } else { s >= t });
        // nearest stored reference on either side
        let k = if k == 0 {
            0
        } else if k >= self.phase_times.len() {
            self.phase_times.len() - 1
        } else if (self.phase_times[k] - t).abs() < (t - self.phase_times[k - 1]).abs() {
            k
        } else {
            k - 1
        };
        let reference = self.phase_values[k];
        raw + 2.0 * PI * ((reference - raw) / (2.0 * PI)).round()
    }

    pub fn rho(&self, t: f64) -> Result<f64> {
        Ok(self.state(t)?.rho)
    }

    pub fn rho_dot(&self, t: f64) -> Result<f64> {
        Ok(self.state(t)?.rho_dot)
    }

    /// `φ(t′ → t) = ω₀ ∫_{t′}^{t} ρ⁻² dt`
    pub fn phase_at(&self, t: f64) -> Result<f64> {
        Ok(self.state(t)?.phase)
    }

    /// `φ(t_a → t_b)`. Additive by construction.
    pub fn phase(&self, t_a: f64, t_b: f64) -> Result<f64> {
        Ok(self.phase_at(t_b)? - self.phase_at(t_a)?)
    }

    /// Total phase over the solved interval.
    pub fn total_phase(&self) -> f64 {
        *self.phase_values.last().unwrap()
    }

    /// The same phase by adaptive quadrature of `ω₀/ρ²` (independent check).
    pub fn phase_by_quadrature(&self, t_a: f64, t_b: f64, tol: f64) -> Result<f64> {
        self.check(t_a)?;
        self.check(t_b)?;
        let w2 = self.omega0 * self.omega0;
        let mut y = [0.0; 4];
        quad::integrate(
            |t| {
                self.dense.eval_into(t, &mut y);
                self.omega0 / (y[0] * y[0] + w2 * y[2] * y[2])
            },
            t_a,
            t_b,
            tol,
        )
    }

    /// `ρ̈ + Ω²ρ − ω₀²/ρ³` at `t`, with ρ̈ taken by a 4th-order finite
    /// difference of the dense ρ̇ (independent of the ODE right-hand side).
    pub fn residual<P: Profile + ?Sized>(&self, omega_sq: &P, t: f64) -> Result<f64> {
        self.check(t)?;
        let (a, b) = self.interval();
        let (lo, hi) = (a.min(b), a.max(b));
        let h = 1e-3 * (hi - lo).min(1.0);
        let centre = t.clamp(lo + 2.0 * h, hi - 2.0 * h);
        let nodes: Vec<f64> = (-2..=2).map(|k| centre + k as f64 * h).collect();
        let w = fornberg_weights(t, &nodes, 1);
        let rho_ddot: f64 = nodes
            .iter()
            .zip(&w[1])
            .map(|(&s, w)| w * self.state_unchecked(s.clamp(lo, hi)).rho_dot)
            .sum();
        let s = self.state_unchecked(t);
        Ok(rho_ddot + omega_sq.value(t) * s.rho - self.omega0.powi(2) / s.rho.powi(3))
    }

    /// Largest |residual| over `n` uniformly spaced check points.
    pub fn max_residual<P: Profile + ?Sized>(&self, omega_sq: &P, n: usize) -> Result<f64> {
        let (a, b) = self.interval();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let t = if n == 1 { a } else { a + (b - a) * k as f64 / (n - 1) as f64 };
            worst = worst.max(self.residual(omega_sq, t)?.abs());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant(w2: f64) -> impl Profile {
        move |_t: f64| w2
    }

    #[test]
    fn constant_frequency_gives_unit_amplitude() {
        let sol = solve_ermakov(&constant(2.25), 1.5, (0.0, 4.0)).unwrap();
        for t in [0.0, 0.3, 1.7, 4.0] {
            let s = sol.state(t).unwrap();
            assert!((s.rho - 1.0).abs() < 1e-12, "{}", s.rho);
            assert!(s.rho_dot.abs() < 1e-11);
            assert!((s.phase - 1.5 * t).abs() < 1e-11, "{} vs {}", s.phase, 1.5 * t);
        }
        assert!((sol.total_phase() - 6.0).abs() < 1e-11);
    }

    #[test]
    fn free_mode_matches_closed_form() {
        let sol = solve_ermakov(&constant(0.0), 1.0, (0.0, 3.0)).unwrap();
        for t in [0.0, 0.5, 1.0, 2.2, 3.0] {
            let s = sol.state(t).unwrap();
            assert!((s.rho - (1.0 + t * t).sqrt()).abs() < 1e-12);
            assert!((s.phase - t.atan()).abs() < 1e-12);
        }
        assert!((sol.phase(0.0, 1.0).unwrap() - PI / 4.0).abs() < 1e-12);
        assert!(sol.max_residual(&constant(0.0), 101).unwrap() < 1e-10);
    }

    #[test]
    fn exponential_mass_mode_is_stationary() {
        let g: f64 = 0.1;
        let w2 = 1.0 - g * g / 4.0;
        let sol = solve_ermakov(&constant(w2), w2.sqrt(), (0.0, 2.0)).unwrap();
        for t in [0.5, 2.0] {
            assert!((sol.rho(t).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_examples() {
        let sol = solve_ermakov(&constant(4.0), 2.0, (0.0, 1.0)).unwrap();
        assert!((sol.phase(0.2, 0.7).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(sol.phase(0.4, 0.4).unwrap(), 0.0);
        assert!(sol.phase(0.0, 1.5).is_err());
    }

    #[test]
    fn pinney_residual_is_small_for_driven_frequency() {
        let w2 = |t: f64| 1.0 + 0.3 * (2.0 * t).sin();
        for omega0 in [0.5, 1.0, 2.0] {
            let sol = solve_ermakov(&w2, omega0, (0.0, 6.0)).unwrap();
            let r = sol.max_residual(&w2, 101).unwrap();
            assert!(r <= 1e-8 * 1.3, "omega0 {omega0}: residual {r:e}");
        }
    }

    #[test]
    fn matches_direct_nonlinear_integration() {
        let w2 = |t: f64| 1.0 + 0.5 * t.sin();
        let omega0 = 1.0;
        let sol = solve_ermakov(&w2, omega0, (0.0, 3.0)).unwrap();
        let direct = ode::integrate(
            |t, y, dy| {
                dy[0] = y[1];
                dy[1] = -w2(t) * y[0] + omega0.powi(2) / y[0].powi(3);
            },
            0.0,
            &[1.0, 0.0],
            3.0,
            &Tolerances::new(1e-12, 1e-14),
        )
        .unwrap();
        for t in [0.7, 1.9, 3.0] {
            let y = direct.eval(t).unwrap();
            let s = sol.state(t).unwrap();
            assert!((s.rho - y[0]).abs() < 1e-9);
            assert!((s.rho_dot - y[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn wronskian_and_monotone_phase() {
        let w2 = |t: f64| 2.0 - (0.7 * t).cos();
        let sol = solve_ermakov(&w2, 0.8, (0.0, 10.0)).unwrap();
        let mut last = -1.0;
        for k in 0..=400 {
            let s = sol.state(k as f64 * 0.025).unwrap();
            assert!((s.wronskian() - 1.0).abs() < 1e-10);
            assert!(s.rho > 0.0);
            assert!(s.phase > last);
            last = s.phase;
        }
        // ρ² dφ/dt = ω₀
        let t = 4.3;
        let h = 1e-4;
        let dphi = (sol.phase_at(t + h).unwrap() - sol.phase_at(t - h).unwrap()) / (2.0 * h);
        assert!((sol.rho(t).unwrap().powi(2) * dphi - 0.8).abs() < 1e-7);
    }

    #[test]
    fn basis_does_not_depend_on_gauge() {
        let w2 = |t: f64| 1.0 + 0.2 * t;
        let a = solve_ermakov(&w2, 1.0, (0.0, 2.0)).unwrap();
        let b = solve_ermakov(&w2, 3.0, (0.0, 2.0)).unwrap();
        for t in [0.1, 1.0, 2.0] {
            let (sa, sb) = (a.state(t).unwrap(), b.state(t).unwrap());
            assert_eq!((sa.u, sa.du, sa.v, sa.dv), (sb.u, sb.du, sb.v, sb.dv));
        }
    }

    #[test]
    fn phase_crosses_pi_continuously() {
        let sol = solve_ermakov(&constant(1.0), 1.0, (0.0, 3.5)).unwrap();
        assert!((sol.total_phase() - 3.5).abs() < 1e-11);
        let q = sol.phase_by_quadrature(0.0, 3.5, 1e-12).unwrap();
        assert!((q - 3.5).abs() < 1e-10);
        // a badly mismatched gauge makes ρ small and φ fast; still consistent
        let sol = solve_ermakov(&constant(1.0), 40.0, (0.0, 3.5)).unwrap();
        let q = sol.phase_by_quadrature(0.0, 3.5, 1e-11).unwrap();
        assert!((q - sol.total_phase()).abs() < 1e-8, "{q} vs {}", sol.total_phase());
    }

    #[test]
    fn backward_solution_has_negative_phase() {
        let sol = solve_ermakov(&constant(1.0), 1.0, (2.0, 0.0)).unwrap();
        assert!((sol.total_phase() + 2.0).abs() < 1e-11);
        assert!((sol.phase_at(1.0).unwrap() + 1.0).abs() < 1e-11);
    }

    #[test]
    fn time_reversal_recovers_initial_conditions() {
        let w2 = |t: f64| 1.0 + 0.4 * (1.3 * t).cos();
        let sol = solve_ermakov(&w2, 1.0, (0.0, 5.0)).unwrap();
        let end = sol.state(5.0).unwrap();
        let back = ode::integrate(linear_rhs(&w2), 5.0, &[end.u, end.du, end.v, end.dv], 0.0, &DEFAULT_TOLERANCES).unwrap();
        let y = back.final_state();
        for (a, b) in y.iter().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-9, "{y:?}");
        }
    }

    #[test]
    fn rejects_bad_gauge() {
        assert!(solve_ermakov(&constant(1.0), 0.0, (0.0, 1.0)).is_err());
        assert!(solve_ermakov(&constant(1.0), f64::NAN, (0.0, 1.0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn phase_is_additive(a in 0.0f64..4.0, b in 0.0f64..4.0, c in 0.0f64..4.0, eps in 0.0f64..0.5) {
            let w2 = move |t: f64| 1.0 + eps * (t * 1.7).sin();
            let sol = solve_ermakov(&w2, 1.0, (0.0, 4.0)).unwrap();
            let lhs = sol.phase(a, c).unwrap();
            let rhs = sol.phase(a, b).unwrap() + sol.phase(b, c).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn quadrature_agrees_with_unwrapped_phase(eps in 0.0f64..0.8, omega0 in 0.3f64..3.0, t in 0.1f64..6.0) {
            let w2 = move |s: f64| 1.0 + eps * (s * 0.9).cos();
            let sol = solve_ermakov(&w2, omega0, (0.0, 6.0)).unwrap();
            let q = sol.phase_by_quadrature(0.0, t, 1e-12).unwrap();
            prop_assert!((q - sol.phase_at(t).unwrap()).abs() < 1e-9);
        }
    }
}
