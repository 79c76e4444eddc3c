use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::shells::ShellDiscretization;
use crate::error::{Error, Result};
use crate::params::SystemParams;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// ẋ = A·x + b for the state x = (a, σ_1..σ_M, s_1..s_M):
///
/// ```text
/// ȧ   = −(κ − iΔ) a + i Σ G_k σ_k + √(2κ_H) a_in
/// σ̇_k = −(γ − iΔ) σ_k + i G_k a + i Ω_k s_k
/// ṡ_k = −(γ₀ − iΔ) s_k + i Ω_k σ_k
/// ```
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CMatrix,
    pub drive: CVector,
    shells: usize,
}

impl LinearSystem {
    pub fn new(params: &SystemParams, shells: &ShellDiscretization, input: Complex64) -> Self {
        let m = shells.len();
        let n = 2 * m + 1;
        let delta = params.delta();
        let mut a = CMatrix::zeros(n, n);
        a[(0, 0)] = -Complex64::new(params.kappa(), -delta);
        let couplings = shells.probe_couplings(params.g_n());
        let rabi = shells.control_rabi(params.omega_c());
        let optical = -Complex64::new(params.gamma(), -delta);
        let ground = -Complex64::new(params.gamma0(), -delta);
        for k in 0..m {
            let (sigma, s) = (1 + k, 1 + m + k);
            a[(0, sigma)] = I * couplings[k];
            a[(sigma, 0)] = I * couplings[k];
            a[(sigma, sigma)] = optical;
            a[(sigma, s)] = I * rabi[k];
            a[(s, s)] = ground;
            a[(s, sigma)] = I * rabi[k];
        }
        let mut drive = CVector::zeros(n);
        drive[0] = (2.0 * params.cavity.kappa_h).sqrt() * input;
        Self { matrix: a, drive, shells: m }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn shells(&self) -> usize {
        self.shells
    }

    pub fn zero_state(&self) -> CVector {
        CVector::zeros(self.dim())
    }

    /// x_ss = −A⁻¹ b.
    pub fn steady_state(&self) -> Result<CVector> {
        let lu = self.matrix.clone().lu();
        let x = lu.solve(&self.drive).ok_or_else(|| Error::Integrator {
            t: f64::INFINITY,
            reason: "system matrix is singular; no steady state".into(),
        })?;
        Ok(-x)
    }

    pub fn rhs(&self, x: &CVector) -> CVector {
        let mut dx = self.drive.clone();
        dx.gemv(Complex64::new(1.0, 0.0), &self.matrix, x, Complex64::new(1.0, 0.0));
        dx
    }
}
