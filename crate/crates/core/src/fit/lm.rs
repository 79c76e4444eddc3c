//! Damped least squares (Levenberg–Marquardt) with a central-difference
//! Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when every accepted step satisfies |δ_j| < step_tol·|x_j|.
    pub step_tol: f64,
    /// Relative finite-difference step per parameter.
    pub fd_step: f64,
    /// Largest allowed cosine between the residual and any Jacobian column
    /// for a fit to count as converged.
    pub gradient_tol: f64,
    /// Residual RMS at or below which the fit is exact to rounding and the
    /// gradient test is skipped (residual units).
    pub residual_floor: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, step_tol: 1e-8, fd_step: 1e-6, gradient_tol: 1e-6, residual_floor: 1e-12, initial_damping: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Jacobian evaluations performed.
    pub iterations: usize,
    pub converged: bool,
    /// max_j |J_jᵀr|/(‖J_j‖‖r‖) at the returned point.
    pub gradient_cosine: f64,
    /// s²(JᵀJ)⁻¹ with s² = rss/(m − n).
    pub covariance: DMatrix<f64>,
    /// rss after each accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

impl LmOutcome {
    pub fn sigmas(&self) -> Vec<f64> {
        (0..self.params.len()).map(|i| self.covariance[(i, i)].max(0.0).sqrt()).collect()
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn jacobian<F>(f: &F, x: &[f64], typical: &[f64], m: usize, h_rel: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = h_rel * x[j].abs().max(typical[j]);
        probe[j] = x[j] + h;
        let plus = f(&probe)?;
        probe[j] = x[j] - h;
        let minus = f(&probe)?;
        probe[j] = x[j];
        // the actual spacing after rounding
        let span = (x[j] + h) - (x[j] - h);
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / span;
        }
    }
    Ok(jac)
}

fn gradient_cosine(jac: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    jac.column_iter()
        .map(|c| {
            let cn = c.norm();
            if cn == 0.0 { 0.0 } else { c.dot(r).abs() / (cn * rn) }
        })
        .fold(0.0, f64::max)
}

/// Minimises Σ r_i(x)² from `x0`. Returns the best point found together
/// with a convergence flag; callers decide whether non-convergence is fatal.
/// Parameters starting at zero use a typical magnitude of 1 for their
/// finite-difference step; see [`minimize_scaled`].
pub fn minimize<F>(residuals: F, x0: &[f64], opts: &LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let typical: Vec<f64> = x0.iter().map(|x| if *x == 0.0 { 1.0 } else { x.abs() }).collect();
    minimize_scaled(residuals, x0, &typical, opts)
}

/// As [`minimize`], with an explicit typical magnitude per parameter. The
/// finite-difference step and the step test use max(|x_j|, typical_j).
pub fn minimize_scaled<F>(residuals: F, x0: &[f64], typical: &[f64], opts: &LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    if typical.len() != n || typical.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(crate::error::invalid("typical", "one finite positive magnitude per parameter"));
    }
    let mut x = x0.to_vec();
    let mut r = residuals(&x)?;
    let m = r.len();
    if m < n {
        return Err(Error::InsufficientData { needed: n, got: m });
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("residuals are not finite at the initial guess".into()));
    }
    let floor = opts.residual_floor.powi(2) * m as f64;
    let mut rss = sum_sq(&r);
    let mut history = vec![rss];
    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    let mut converged = false;

    let mut jac = jacobian(&residuals, &x, typical, m, opts.fd_step)?;
    iterations += 1;
    'outer: while iterations <= opts.max_iterations {
        let scale: Vec<f64> = jac.column_iter().map(|c| c.norm()).collect();
        if let Some(j) = scale.iter().position(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::DegenerateFit(format!("parameter {j} does not influence the residuals")));
        }
        let rv = DVector::from_column_slice(&r);
        if rss <= floor || gradient_cosine(&jac, &rv) == 0.0 {
            converged = true;
            break;
        }
        let js = DMatrix::from_fn(m, n, |i, j| jac[(i, j)] / scale[j]);
        let normal = js.transpose() * &js;
        let rhs = -(js.transpose() * &rv);
        loop {
            let damped = &normal + DMatrix::identity(n, n) * lambda;
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    break 'outer;
                }
                continue;
            };
            let ds = chol.solve(&rhs);
            let step: Vec<f64> = (0..n).map(|j| ds[j] / scale[j]).collect();
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + d).collect();
            let r_trial = residuals(&trial)?;
            let rss_trial = sum_sq(&r_trial);
            if rss_trial.is_finite() && rss_trial <= rss {
                let small = (0..n).all(|j| step[j].abs() <= opts.step_tol * x[j].abs().max(typical[j]));
                x = trial;
                r = r_trial;
                rss = rss_trial;
                history.push(rss);
                lambda = (lambda / 10.0).max(1e-12);
                if small {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e20 {
                // no descent possible along the damped direction
                break 'outer;
            }
        }
        if iterations == opts.max_iterations {
            break;
        }
        jac = jacobian(&residuals, &x, typical, m, opts.fd_step)?;
        iterations += 1;
    }

    let jac_final = jacobian(&residuals, &x, typical, m, opts.fd_step)?;
    let cosine = gradient_cosine(&jac_final, &DVector::from_column_slice(&r));
    let converged = rss <= floor || ((converged || lambda > 1e20) && cosine <= opts.gradient_tol);
    let covariance = covariance(&jac_final, rss, m)?;
    Ok(LmOutcome { params: x, residuals: r, rss, iterations, converged, gradient_cosine: cosine, covariance, history })
}

fn covariance(jac: &DMatrix<f64>, rss: f64, m: usize) -> Result<DMatrix<f64>> {
    let n = jac.ncols();
    let scale: Vec<f64> = jac.column_iter().map(|c| c.norm()).collect();
    if scale.contains(&0.0) {
        return Err(Error::DegenerateFit("singular normal equations".into()));
    }
    let js = DMatrix::from_fn(m, n, |i, j| jac[(i, j)] / scale[j]);
    let inv = (js.transpose() * js)
        .try_inverse()
        .ok_or_else(|| Error::DegenerateFit("singular normal equations".into()))?;
    let s2 = if m > n { rss / (m - n) as f64 } else { 0.0 };
    Ok(DMatrix::from_fn(n, n, |i, j| s2 * inv[(i, j)] / (scale[i] * scale[j])))
}
