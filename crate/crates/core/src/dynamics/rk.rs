//! Adaptive Dormand–Prince 5(4) integrator, kept as an independent check on
//! the exact propagator.

use num_complex::Complex64;

use super::propagator::Evolution;
use super::system::{CVector, LinearSystem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_steps: 5_000_000 }
    }
}

// The system is autonomous, so the stage times are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order weights are the last row of A; these are the 5th − 4th differences.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates ẋ = A·x + b from `x0` at t = 0, landing exactly on each of
/// `times` (ascending, ≥ 0).
pub fn integrate(
    system: &LinearSystem,
    x0: &CVector,
    times: &[f64],
    snapshot: &dyn Fn(usize) -> bool,
    opts: AdaptiveOptions,
) -> Result<Evolution> {
    let mut x = x0.clone();
    let mut t = 0.0;
    let spectral_guess = system.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut h = 0.1 / spectral_guess;
    let mut k: Vec<CVector> = vec![CVector::zeros(x.len()); 7];
    k[0] = system.rhs(&x);
    let mut steps = 0usize;
    let mut amplitudes = Vec::with_capacity(times.len());
    let mut snapshots = Vec::new();

    for (i, &target) in times.iter().enumerate() {
        if target < t {
            return Err(Error::Integrator { t, reason: "sample times must be ascending".into() });
        }
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::Integrator { t, reason: format!("step budget of {} exhausted (h = {h:e})", opts.max_steps) });
            }
            let last = target - t <= h * (1.0 + 1e-12);
            let step = if last { target - t } else { h };
            for s in 1..7 {
                let mut xs = x.clone();
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        xs.axpy(Complex64::new(step * A[s][j], 0.0), kj, Complex64::new(1.0, 0.0));
                    }
                }
                k[s] = system.rhs(&xs);
            }
            // 5th-order solution is the stage-6 argument (FSAL)
            let mut x_new = x.clone();
            for (j, kj) in k.iter().enumerate().take(6) {
                if A[6][j] != 0.0 {
                    x_new.axpy(Complex64::new(step * A[6][j], 0.0), kj, Complex64::new(1.0, 0.0));
                }
            }
            let mut err_sq = 0.0;
            for idx in 0..x.len() {
                let mut e = Complex64::new(0.0, 0.0);
                for (j, kj) in k.iter().enumerate() {
                    e += kj[idx] * E[j];
                }
                let sc = opts.abs_tol + opts.rel_tol * x[idx].norm().max(x_new[idx].norm());
                err_sq += (e.norm() * step / sc).powi(2);
            }
            let err = (err_sq / x.len() as f64).sqrt();
            steps += 1;
            if !err.is_finite() {
                return Err(Error::Integrator { t, reason: "non-finite error estimate".into() });
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                x = x_new;
                k[0] = k[6].clone();
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !last || err > 1.0 {
                h = step * factor;
            }
            if h < 1e-6 * f64::EPSILON * target.max(1e-30) {
                return Err(Error::Integrator { t, reason: format!("step size underflow (h = {h:e})") });
            }
        }
        amplitudes.push(x[0]);
        if snapshot(i) {
            snapshots.push((i, x.clone()));
        }
    }
    Ok(Evolution { amplitudes, snapshots, final_state: x })
}
