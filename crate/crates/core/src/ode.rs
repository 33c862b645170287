//! Adaptive Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! The integrator works in either time direction. Every accepted step keeps
//! the five interpolation coefficients of the 4th-order continuous extension,
//! so the solution can be evaluated anywhere on the integration interval
//! without re-integrating.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on |h|. `None` leaves the step unconstrained.
    pub max_step: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 1_000_000,
            max_step: None,
        }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = Some(h);
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th minus 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Dense solution of an initial value problem on [start, end] (or
/// [end, start] when integrating backwards).
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    coeffs: Vec<f64>,
    stats: StepStats,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Step boundaries, ordered in the direction of integration.
    pub fn nodes(&self) -> &[f64] {
        &self.times
    }

    /// State at step boundary `k`.
    pub fn node_state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.node_state(self.times.len() - 1)
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.bounds();
        t >= lo && t <= hi
    }

    fn bounds(&self) -> (f64, f64) {
        let (a, b) = (self.start(), self.end());
        (a.min(b), a.max(b))
    }

    fn forward(&self) -> bool {
        self.end() >= self.start()
    }

    /// Index of the step containing `t`.
    fn segment(&self, t: f64) -> usize {
        let n = self.times.len() - 1;
        let fwd = self.forward();
        // partition_point over boundaries 1..n
        let k = self.times[1..n].partition_point(|&s| if fwd { s <= t } else { s >= t });
        k.min(n - 1)
    }

    /// Evaluate the interpolant at `t` into `out`. Caller guarantees that
    /// `t` lies within the integration interval.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let d = self.dim;
        let k = self.segment(t);
        let t0 = self.times[k];
        let h = self.times[k + 1] - t0;
        let theta = if h == 0.0 { 0.0 } else { (t - t0) / h };
        let one_m = 1.0 - theta;
        let c = &self.coeffs[k * 5 * d..(k + 1) * 5 * d];
        for i in 0..d {
            let (r1, r2, r3, r4, r5) = (c[i], c[d + i], c[2 * d + i], c[3 * d + i], c[4 * d + i]);
            out[i] = r1 + theta * (r2 + one_m * (r3 + theta * (r4 + one_m * r5)));
        }
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if !self.contains(t) {
            let (lo, hi) = self.bounds();
            return Err(Error::OutOfDomain { t, start: lo, end: hi });
        }
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        Ok(out)
    }
}

fn rms_norm(v: &[f64], scale: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(scale).map(|(x, s)| (x / s).powi(2)).sum();
    (s / v.len() as f64).sqrt()
}

/// Integrate `y' = rhs(t, y)` from `(t0, y0)` to `t1`.
pub fn integrate<F>(mut rhs: F, t0: f64, y0: &[f64], t1: f64, tol: &Tolerances) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut sol = DenseSolution {
        dim,
        times: vec![t0],
        states: y0.to_vec(),
        coeffs: Vec::new(),
        stats: StepStats::default(),
    };
    if t1 == t0 {
        // Degenerate interval: a single zero-length step keeps eval() valid.
        sol.times.push(t1);
        sol.states.extend_from_slice(y0);
        for r in 0..5 {
            if r == 0 {
                sol.coeffs.extend_from_slice(y0);
            } else {
                sol.coeffs.extend(std::iter::repeat_n(0.0, dim));
            }
        }
        return Ok(sol);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let hmax = tol.max_step.unwrap_or(span).min(span);

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut ytmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut scale = vec![0.0; dim];

    let mut t = t0;
    let mut y = y0.to_vec();
    rhs(t, &y, &mut k1);
    sol.stats.evaluations += 1;

    // Initial step guess (Hairer, Nørsett & Wanner).
    let mut h = {
        for i in 0..dim {
            scale[i] = tol.atol + tol.rtol * y[i].abs();
        }
        let d0 = rms_norm(&y, &scale);
        let d1 = rms_norm(&k1, &scale);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(hmax);
        for i in 0..dim {
            ytmp[i] = y[i] + dir * h0 * k1[i];
        }
        rhs(t + dir * h0, &ytmp, &mut k2);
        sol.stats.evaluations += 1;
        for i in 0..dim {
            err[i] = k2[i] - k1[i];
        }
        let d2 = rms_norm(&err, &scale) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dm).powf(0.2)
        };
        (100.0 * h0).min(h1).min(hmax)
    };

    let mut last_rejected = false;
    loop {
        if sol.stats.accepted + sol.stats.rejected >= tol.max_steps {
            return Err(Error::Integrator {
                t,
                message: format!("exceeded {} steps", tol.max_steps),
            });
        }
        let remaining = (t1 - t).abs();
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(span) {
            return Err(Error::Integrator {
                t,
                message: format!("step size underflow (h = {h:e})"),
            });
        }
        let hs = dir * h;

        for i in 0..dim {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        rhs(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + hs };
        rhs(t + hs, &ytmp, &mut k6);
        for i in 0..dim {
            ynew[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t_new, &ynew, &mut k7);
        sol.stats.evaluations += 6;

        for i in 0..dim {
            err[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            scale[i] = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
        }
        let en = rms_norm(&err, &scale);
        if !en.is_finite() {
            return Err(Error::Integrator {
                t,
                message: "non-finite error estimate".into(),
            });
        }

        let mut fac = if en == 0.0 { 10.0 } else { 0.9 * en.powf(-0.2) };
        fac = fac.clamp(0.2, 10.0);

        if en <= 1.0 {
            sol.stats.accepted += 1;
            for i in 0..dim {
                let rc2 = ynew[i] - y[i];
                let rc3 = hs * k1[i] - rc2;
                let rc4 = rc2 - hs * k7[i] - rc3;
                let rc5 = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                err[i] = rc5;
                ytmp[i] = rc4;
                scale[i] = rc3;
                k2[i] = rc2;
            }
            sol.coeffs.extend_from_slice(&y);
            sol.coeffs.extend_from_slice(&k2);
            sol.coeffs.extend_from_slice(&scale);
            sol.coeffs.extend_from_slice(&ytmp);
            sol.coeffs.extend_from_slice(&err);

            t = t_new;
            y.copy_from_slice(&ynew);
            k1.copy_from_slice(&k7);
            sol.times.push(t);
            sol.states.extend_from_slice(&y);
            if last {
                return Ok(sol);
            }
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
        } else {
            sol.stats.rejected += 1;
            last_rejected = true;
            fac = fac.min(1.0);
        }
        h = (h * fac).min(hmax);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_matches_closed_form() {
        let sol = integrate(|_, y, dy| dy[0] = y[0], 0.0, &[1.0], 2.0, &Tolerances::new(1e-12, 1e-14)).unwrap();
        let yf = sol.final_state()[0];
        assert!((yf - 2f64.exp()).abs() < 1e-10 * 2f64.exp(), "{yf}");
    }

    #[test]
    fn dense_output_is_accurate_between_nodes() {
        let sol = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            10.0,
            &Tolerances::new(1e-12, 1e-14),
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=1000 {
            let t = 10.0 * k as f64 / 1000.0;
            let y = sol.eval(t).unwrap();
            worst = worst.max((y[0] - t.cos()).abs()).max((y[1] + t.sin()).abs());
        }
        assert!(worst < 1e-10, "dense output error {worst:e}");
    }

    #[test]
    fn dense_output_converges_at_fourth_order() {
        // Fixed number of steps via max_step and loose tolerance so the
        // interpolation error dominates.
        let mid_error = |h: f64| {
            let tol = Tolerances {
                rtol: 1.0,
                atol: 1.0,
                max_steps: 100_000,
                max_step: Some(h),
            };
            let sol = integrate(|t, _, dy| dy[0] = t.cos(), 0.0, &[0.0], 1.0, &tol).unwrap();
            let mut worst: f64 = 0.0;
            for k in 0..sol.nodes().len() - 1 {
                let tm = 0.5 * (sol.nodes()[k] + sol.nodes()[k + 1]);
                let y = sol.eval(tm).unwrap()[0];
                let exact = tm.sin();
                let node_err = sol.node_state(k)[0] - sol.nodes()[k].sin();
                worst = worst.max((y - exact - node_err).abs());
            }
            worst
        };
        let ratio = mid_error(0.1) / mid_error(0.05);
        // Local interpolation error is O(h^5).
        assert!(ratio > 20.0, "ratio {ratio}");
    }

    #[test]
    fn backward_integration() {
        let sol = integrate(|_, y, dy| dy[0] = -y[0], 1.0, &[1.0], -1.0, &Tolerances::new(1e-12, 1e-14)).unwrap();
        assert!((sol.final_state()[0] - 2f64.exp()).abs() < 1e-10 * 2f64.exp());
        let mid = sol.eval(0.0).unwrap()[0];
        assert!((mid - 1f64.exp()).abs() < 1e-10 * 1f64.exp());
        assert!(sol.eval(1.5).is_err());
    }

    #[test]
    fn zero_length_interval() {
        let sol = integrate(|_, _, dy| dy[0] = 1.0, 3.0, &[2.0], 3.0, &Tolerances::default()).unwrap();
        assert_eq!(sol.eval(3.0).unwrap(), vec![2.0]);
    }
}
