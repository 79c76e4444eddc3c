//! Complex EIT susceptibility χ(Δ) of an ensemble in the cavity probe mode.
//!
//! Conventions: χ is in rad/s and enters the intracavity amplitude as
//! `a = √(2κ_H)·a_in / (κ − iΔ − iχ)`, so a passive medium has
//! `Re(−iχ) ≥ 0`. The control field dresses each ion with the saturation
//! parameter Θ; averaging over the Gaussian transverse profile (probe
//! intensity u ∈ (0, 1], control intensity u^β) gives
//!
//! ```text
//! χ = i g_N² ∫₀¹ du / (γ − iΔ + (Ω_c²/2)·u^β / (γ₀ − iΔ))
//! ```
//!
//! which for β = 1 integrates to `i g_N²/(γ − iΔ) · ln(1+Θ)/Θ`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::ShellDiscretization;
use crate::error::{invalid, require_non_negative, require_positive, Result};
use crate::exec::Execution;
use crate::params::SystemParams;
use crate::quadrature::{integrate, QuadratureOptions};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Below this |Θ| the log ratio uses its 4-term series.
pub const SERIES_THRESHOLD: f64 = 1e-6;

/// Θ = (Ω_c²/2) / ((γ − iΔ)(γ₀ − iΔ)). Infinite only for γ₀ = 0, Δ = 0, Ω_c > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SaturationTheta {
    Finite(Complex64),
    Infinite,
}

impl SaturationTheta {
    pub fn value(self) -> Option<Complex64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Infinite => None,
        }
    }

    /// ln(1+Θ)/Θ on the principal branch; 1 at Θ = 0 and 0 at Θ = ∞.
    pub fn log_ratio(self) -> Complex64 {
        match self {
            Self::Infinite => ZERO,
            Self::Finite(t) if t.norm() < SERIES_THRESHOLD => 1.0 - t / 2.0 + t * t / 3.0 - t * t * t / 4.0,
            Self::Finite(t) => ln_1p(t) / t,
        }
    }

    /// True when 1+Θ is off the negative real axis, where the principal
    /// logarithm is continuous.
    pub fn branch_safe(self) -> bool {
        match self {
            Self::Infinite => true,
            Self::Finite(t) => t.im != 0.0 || 1.0 + t.re > 0.0,
        }
    }

    /// True if the straight path from `self` to `next` passes through the
    /// cut of ln(1+Θ), i.e. Im(Θ) changes sign while Re(1+Θ) < 0.
    pub fn crosses_cut_to(self, next: SaturationTheta) -> bool {
        match (self, next) {
            (Self::Finite(a), Self::Finite(b)) => {
                let sign_change = a.im * b.im < 0.0 || (a.im == 0.0) != (b.im == 0.0);
                if !sign_change {
                    return false;
                }
                // Re(1+Θ) where Im(Θ) = 0 along the segment
                let s = if a.im == b.im { 0.0 } else { a.im / (a.im - b.im) };
                1.0 + a.re + s * (b.re - a.re) < 0.0
            }
            _ => false,
        }
    }

    /// 1/(1+Θ).
    pub fn homogeneous_factor(self) -> Complex64 {
        match self {
            Self::Infinite => ZERO,
            Self::Finite(t) => 1.0 / (1.0 + t),
        }
    }
}

/// ln(1+z) without the cancellation of forming 1+z for small |z|.
fn ln_1p(z: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * z.re + z.re * z.re + z.im * z.im).ln_1p();
    let im = z.im.atan2(1.0 + z.re);
    Complex64::new(re, im)
}

pub fn theta(delta: f64, gamma: f64, gamma0: f64, omega_c: f64) -> Result<SaturationTheta> {
    require_positive("gamma", gamma)?;
    require_non_negative("gamma0", gamma0)?;
    require_non_negative("omega_c", omega_c)?;
    let ground = Complex64::new(gamma0, -delta);
    if omega_c == 0.0 {
        return Ok(SaturationTheta::Finite(ZERO));
    }
    if ground == ZERO {
        return Ok(SaturationTheta::Infinite);
    }
    let optical = Complex64::new(gamma, -delta);
    Ok(SaturationTheta::Finite(0.5 * omega_c * omega_c / (optical * ground)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Discrete,
    Continuous,
    Canonical,
    Quadrature,
    Shells,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexSusceptibility {
    pub value: Complex64,
    pub variant: Variant,
}

impl ComplexSusceptibility {
    /// Re(−iχ): the loss the medium adds to the cavity denominator.
    pub fn absorption(&self) -> f64 {
        (-I * self.value).re
    }
}

fn optical(delta: f64, gamma: f64) -> Complex64 {
    Complex64::new(gamma, -delta)
}

/// Continuous medium, Gaussian control with w_p = w_c.
pub fn chi_continuous(delta: f64, g_n: f64, gamma: f64, gamma0: f64, omega_c: f64) -> Result<ComplexSusceptibility> {
    let t = theta(delta, gamma, gamma0, omega_c)?;
    let value = I * g_n * g_n / optical(delta, gamma) * t.log_ratio();
    Ok(ComplexSusceptibility { value, variant: Variant::Continuous })
}

/// Homogeneous control field (Ψ_c = 1).
pub fn chi_canonical(delta: f64, g_n: f64, gamma: f64, gamma0: f64, omega_c: f64) -> Result<ComplexSusceptibility> {
    let t = theta(delta, gamma, gamma0, omega_c)?;
    let value = I * g_n * g_n / optical(delta, gamma) * t.homogeneous_factor();
    Ok(ComplexSusceptibility { value, variant: Variant::Canonical })
}

/// Radial integral evaluated by adaptive quadrature (relative tolerance
/// 1e-10); β = w_p²/w_c².
pub fn chi_quadrature(delta: f64, g_n: f64, gamma: f64, gamma0: f64, omega_c: f64, beta: f64) -> Result<ComplexSusceptibility> {
    require_positive("gamma", gamma)?;
    require_non_negative("gamma0", gamma0)?;
    require_non_negative("omega_c", omega_c)?;
    require_positive("beta", beta)?;
    let opt = optical(delta, gamma);
    let ground = Complex64::new(gamma0, -delta);
    let value = if omega_c == 0.0 {
        I * g_n * g_n / opt
    } else if ground == ZERO {
        // dressing is infinite everywhere except the measure-zero edge u = 0
        ZERO
    } else {
        let drive = 0.5 * omega_c * omega_c / ground;
        let r = integrate(|u| 1.0 / (opt + drive * u.powf(beta)), 0.0, 1.0, QuadratureOptions::default())?;
        I * g_n * g_n * r.value
    };
    Ok(ComplexSusceptibility { value, variant: Variant::Quadrature })
}

/// Transverse mode function exp(−r²/w²).
#[inline]
pub fn mode_function(r: f64, waist: f64) -> f64 {
    (-(r * r) / (waist * waist)).exp()
}

/// Discrete ensemble with explicit radial positions.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEnsemble {
    pub radii: Vec<f64>,
    /// Single-ion peak coupling g (the longitudinal average ḡ = g/√2 is applied internally).
    pub g: f64,
    pub waist_probe: f64,
    pub waist_control: f64,
}

impl DiscreteEnsemble {
    pub fn validate(&self) -> Result<()> {
        require_non_negative("g", self.g)?;
        require_positive("waist_probe", self.waist_probe)?;
        require_positive("waist_control", self.waist_control)?;
        if let Some(r) = self.radii.iter().find(|r| !r.is_finite()) {
            return Err(invalid("radii", format!("non-finite position {r}")));
        }
        Ok(())
    }

    /// Ions sampled over a disk of `radius` with uniform areal density, with
    /// g chosen so that the ensemble's collective coupling equals `g_n`:
    /// the effective number is N = count·w_p²/(4R²).
    pub fn uniform_disk(count: usize, radius: f64, waist_probe: f64, waist_control: f64, g_n: f64, sampling: DiskSampling, seed: u64) -> Result<Self> {
        require_positive("radius", radius)?;
        require_positive("waist_probe", waist_probe)?;
        if count == 0 {
            return Ok(Self { radii: Vec::new(), g: 0.0, waist_probe, waist_control });
        }
        let n_eff = count as f64 * waist_probe * waist_probe / (4.0 * radius * radius);
        let radii = sample_disk_radii(count, radius, sampling, seed);
        Ok(Self { radii, g: g_n / n_eff.sqrt(), waist_probe, waist_control })
    }

    pub fn chi(&self, delta: f64, gamma: f64, gamma0: f64, omega_c: f64, exec: Execution) -> Result<ComplexSusceptibility> {
        chi_discrete(&self.radii, self.g, gamma, gamma0, omega_c, delta, self.waist_probe, self.waist_control, exec)
    }
}

/// χ = Σ_j i ḡ² Ψ_p²(r_j) / (γ − iΔ + (Ω_c²/2) Ψ_c²(r_j) / (γ₀ − iΔ)).
#[allow(clippy::too_many_arguments)]
pub fn chi_discrete(
    radii: &[f64],
    g: f64,
    gamma: f64,
    gamma0: f64,
    omega_c: f64,
    delta: f64,
    waist_probe: f64,
    waist_control: f64,
    exec: Execution,
) -> Result<ComplexSusceptibility> {
    require_positive("gamma", gamma)?;
    require_non_negative("gamma0", gamma0)?;
    require_non_negative("omega_c", omega_c)?;
    require_positive("waist_probe", waist_probe)?;
    require_positive("waist_control", waist_control)?;
    let g_bar_sq = 0.5 * g * g;
    let opt = optical(delta, gamma);
    let ground = Complex64::new(gamma0, -delta);
    let half_omega_sq = 0.5 * omega_c * omega_c;
    let term = |&r: &f64| -> Complex64 {
        let psi_p = mode_function(r, waist_probe);
        let dressing = half_omega_sq * mode_function(r, waist_control).powi(2);
        let denom = if dressing == 0.0 {
            opt
        } else if ground == ZERO {
            return ZERO;
        } else {
            opt + dressing / ground
        };
        psi_p * psi_p / denom
    };
    let sum = exec.chunked_sum(radii, 8192, ZERO, term);
    Ok(ComplexSusceptibility { value: I * g_bar_sq * sum, variant: Variant::Discrete })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiskSampling {
    /// Independent uniform points.
    Iid,
    /// One point per equal-area annulus, jittered within it.
    #[default]
    Stratified,
}

/// Radii of `count` points uniformly distributed over a disk, from a seeded
/// ChaCha8 stream. Only the radius matters for the cylindrically symmetric
/// mode functions.
pub fn sample_disk_radii(count: usize, radius: f64, sampling: DiskSampling, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = count as f64;
    (0..count)
        .map(|k| {
            let xi: f64 = rng.random();
            let area_fraction = match sampling {
                DiskSampling::Iid => xi,
                DiskSampling::Stratified => (k as f64 + xi) / n,
            };
            radius * area_fraction.sqrt()
        })
        .collect()
}

/// Which susceptibility a spectrum scan uses.
#[derive(Debug, Clone, PartialEq)]
pub enum SusceptibilityModel {
    Continuous,
    Canonical,
    Quadrature,
    Discrete(Arc<DiscreteEnsemble>),
    Shells(ShellDiscretization),
}

impl SusceptibilityModel {
    pub fn variant(&self) -> Variant {
        match self {
            Self::Continuous => Variant::Continuous,
            Self::Canonical => Variant::Canonical,
            Self::Quadrature => Variant::Quadrature,
            Self::Discrete(_) => Variant::Discrete,
            Self::Shells(_) => Variant::Shells,
        }
    }

    /// χ at detuning `delta` for the rates in `params` (its own Δ is ignored).
    /// The discrete model takes its coupling from the ensemble itself.
    pub fn chi(&self, params: &SystemParams, delta: f64) -> Result<ComplexSusceptibility> {
        let (g_n, gamma, gamma0, omega_c) = (params.g_n(), params.gamma(), params.gamma0(), params.omega_c());
        match self {
            Self::Continuous if params.beta == 1.0 => chi_continuous(delta, g_n, gamma, gamma0, omega_c),
            Self::Continuous | Self::Quadrature => chi_quadrature(delta, g_n, gamma, gamma0, omega_c, params.beta),
            Self::Canonical => chi_canonical(delta, g_n, gamma, gamma0, omega_c),
            // nested parallelism would only add overhead; scans parallelise over Δ
            Self::Discrete(ens) => ens.chi(delta, gamma, gamma0, omega_c, Execution::Sequential),
            Self::Shells(shells) => shells.chi(params, delta),
        }
    }
}
