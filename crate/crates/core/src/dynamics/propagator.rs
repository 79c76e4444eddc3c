//! Exact propagation of the linear time-invariant system between switching
//! events.
//!
//! The default route diagonalises A through a complex Schur form
//! A = Q·T·Qᴴ and back-substitution on the triangular factor, so that
//! x(t) = x_ss + V·diag(e^{λt})·V⁻¹·(x₀ − x_ss) can be evaluated at any t.
//! When the eigenbasis is too ill-conditioned to trust (degenerate
//! eigenvalues, e.g. identical dark shells with the control off), the state
//! is stepped with a scaling-and-squaring Padé matrix exponential instead.

use log::debug;
use nalgebra::Schur;
use num_complex::Complex64;

use super::system::{CMatrix, CVector, LinearSystem};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Output of a propagation over a list of times.
#[derive(Debug, Clone)]
pub struct Evolution {
    /// Cavity amplitude a(t) at each requested time.
    pub amplitudes: Vec<Complex64>,
    /// Full states at the requested snapshot indices.
    pub snapshots: Vec<(usize, CVector)>,
    /// Full state at the last requested time.
    pub final_state: CVector,
}

#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub eigenvalues: Vec<Complex64>,
    pub vectors: CMatrix,
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl EigenBasis {
    /// Eigendecomposition of `a`, or `None` when it is numerically unusable.
    pub fn new(a: &CMatrix) -> Option<Self> {
        let n = a.nrows();
        let norm = a.norm();
        let schur = Schur::try_new(a.clone(), 1e-15, 100 * n.max(10))?;
        let (q, t) = schur.unpack();
        for j in 0..n {
            for i in (j + 1)..n {
                if t[(i, j)].norm() > 1e-12 * norm {
                    return None;
                }
            }
        }
        let eigenvalues: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
        let small = 1e-14 * norm.max(f64::MIN_POSITIVE);
        let mut y = CMatrix::zeros(n, n);
        for k in 0..n {
            let lambda = eigenvalues[k];
            y[(k, k)] = ONE;
            for j in (0..k).rev() {
                let mut acc = ZERO;
                for l in (j + 1)..=k {
                    acc += t[(j, l)] * y[(l, k)];
                }
                let mut d = t[(j, j)] - lambda;
                if d.norm() < small {
                    d = Complex64::new(small, 0.0);
                }
                y[(j, k)] = -acc / d;
            }
        }
        let mut vectors = q * y;
        for mut col in vectors.column_iter_mut() {
            let nrm = col.norm();
            if !(nrm.is_finite() && nrm > 0.0) {
                return None;
            }
            col /= Complex64::new(nrm, 0.0);
        }
        // eigen-residual check
        let lambda = CMatrix::from_diagonal(&CVector::from_vec(eigenvalues.clone()));
        let residual = (a * &vectors - &vectors * lambda).norm();
        if !(residual <= 1e-9 * norm * (n as f64).sqrt()) {
            debug!("eigenbasis rejected: residual {residual:e}");
            return None;
        }
        let lu = vectors.clone().lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Self { eigenvalues, vectors, lu })
    }

    /// Coefficients c with V·c = v, if the solve is accurate and does not
    /// rely on heavy cancellation between eigenvectors.
    fn coefficients(&self, v: &CVector) -> Option<CVector> {
        let c = self.lu.solve(v)?;
        let scale = v.norm().max(f64::MIN_POSITIVE);
        let residual = (&self.vectors * &c - v).norm();
        let growth = c.iter().map(|x| x.norm()).sum::<f64>() / scale;
        if residual <= 1e-12 * scale && growth <= 1e5 {
            Some(c)
        } else {
            debug!("eigen coefficients rejected: residual {residual:e}, growth {growth:e}");
            None
        }
    }
}

/// Padé [8/8] matrix exponential with scaling and squaring.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm1 = (0..n).map(|j| a.column(j).iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / Complex64::new(2f64.powi(squarings), 0.0);
    const Q: usize = 8;
    let mut c = 1.0;
    let id = CMatrix::identity(n, n);
    let mut num = id.clone();
    let mut den = id.clone();
    let mut power = id;
    for k in 1..=Q {
        c *= (Q + 1 - k) as f64 / (k * (2 * Q + 1 - k)) as f64;
        power = &power * &scaled;
        let term = &power * Complex64::new(c, 0.0);
        num += &term;
        if k % 2 == 0 {
            den += &term;
        } else {
            den -= &term;
        }
    }
    let mut e = den.lu().solve(&num).expect("Padé denominator is invertible for scaled input");
    for _ in 0..squarings {
        e = &e * &e;
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PropagationRoute {
    /// Eigendecomposition, with automatic fallback to [`PropagationRoute::Expm`].
    #[default]
    Eigen,
    /// Matrix-exponential stepping.
    Expm,
}

/// Propagates `x0` (at time 0) to each of `times` (ascending, ≥ 0).
pub fn propagate_exact(
    system: &LinearSystem,
    x0: &CVector,
    times: &[f64],
    snapshot: &dyn Fn(usize) -> bool,
    route: PropagationRoute,
) -> Result<Evolution> {
    check_times(times)?;
    let x_ss = system.steady_state()?;
    let offset = x0 - &x_ss;
    if route == PropagationRoute::Eigen {
        if let Some(basis) = EigenBasis::new(&system.matrix) {
            if let Some(c) = basis.coefficients(&offset) {
                return Ok(eigen_evolution(&basis, &c, x0, &x_ss, times, snapshot));
            }
        }
        debug!("falling back to matrix-exponential stepping");
    }
    Ok(expm_evolution(system, &x_ss, offset, times, snapshot))
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Integrator { t: 0.0, reason: "sample times must be finite, non-negative and ascending".into() });
    }
    Ok(())
}

fn eigen_evolution(basis: &EigenBasis, c: &CVector, x0: &CVector, x_ss: &CVector, times: &[f64], snapshot: &dyn Fn(usize) -> bool) -> Evolution {
    let n = c.len();
    let row0: Vec<Complex64> = (0..n).map(|j| basis.vectors[(0, j)]).collect();
    let mut amplitudes = Vec::with_capacity(times.len());
    let mut snapshots = Vec::new();
    let mut w = CVector::zeros(n);
    for (i, &t) in times.iter().enumerate() {
        if t == 0.0 {
            amplitudes.push(x0[0]);
            if snapshot(i) {
                snapshots.push((i, x0.clone()));
            }
            continue;
        }
        for j in 0..n {
            w[j] = c[j] * (basis.eigenvalues[j] * t).exp();
        }
        let a = x_ss[0] + row0.iter().zip(w.iter()).fold(ZERO, |acc, (v, x)| acc + v * x);
        amplitudes.push(a);
        if snapshot(i) {
            snapshots.push((i, x_ss + &basis.vectors * &w));
        }
    }
    let final_state = match times.last() {
        Some(&t) if t > 0.0 => {
            for j in 0..n {
                w[j] = c[j] * (basis.eigenvalues[j] * t).exp();
            }
            x_ss + &basis.vectors * &w
        }
        _ => x0.clone(),
    };
    Evolution { amplitudes, snapshots, final_state }
}

fn expm_evolution(system: &LinearSystem, x_ss: &CVector, mut offset: CVector, times: &[f64], snapshot: &dyn Fn(usize) -> bool) -> Evolution {
    let mut amplitudes = Vec::with_capacity(times.len());
    let mut snapshots = Vec::new();
    let mut cached: Option<(f64, CMatrix)> = None;
    let mut now = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let dt = t - now;
        if dt > 0.0 {
            let reuse = matches!(&cached, Some((h, _)) if (h - dt).abs() <= 1e-12 * dt);
            if !reuse {
                cached = Some((dt, expm(&(&system.matrix * Complex64::new(dt, 0.0)))));
            }
            let step = &cached.as_ref().expect("cached step").1;
            offset = step * &offset;
            now = t;
        }
        amplitudes.push(x_ss[0] + offset[0]);
        if snapshot(i) {
            snapshots.push((i, x_ss + &offset));
        }
    }
    Evolution { amplitudes, snapshots, final_state: x_ss + offset }
}
