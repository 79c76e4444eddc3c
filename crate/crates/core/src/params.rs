//! Physical parameters and the derivations of composite rates from
//! apparatus-level inputs (mirror transmissions, crystal dimensions).
//!
//! All values are SI with angular frequencies; see [`crate::units`].

use std::f64::consts::{PI, TAU};

use log::warn;

use crate::error::{invalid, require_non_negative, require_positive, Result};
use crate::units::{khz, mhz, per_cm3, ppm, um, SPEED_OF_LIGHT};

/// Reference values of the ion-crystal cavity setup.
pub mod defaults {
    /// Cavity field decay rate, linear MHz.
    pub const KAPPA_MHZ: f64 = 2.2;
    /// Optical dipole decay rate, linear MHz.
    pub const GAMMA_MHZ: f64 = 12.6;
    /// Ground-state decoherence rate, linear kHz.
    pub const GAMMA0_KHZ: f64 = 1.0;
    /// Probe and control waists, µm.
    pub const WAIST_UM: f64 = 37.0;
    /// Incoupling-mirror share of the cavity decay.
    pub const KAPPA_H_FRACTION: f64 = 0.696;
    /// Mirror transmissions and round-trip loss, ppm.
    pub const T_HIGH_PPM: f64 = 1500.0;
    pub const T_LOW_PPM: f64 = 4.0;
    pub const LOSS_PPM: f64 = 650.0;
    /// Cavity length, mm.
    pub const CAVITY_LENGTH_MM: f64 = 11.7;
    /// Outcoupling-mirror share of the cavity decay, T_L / (T_H + T_L + A).
    pub const KAPPA_L_FRACTION: f64 = T_LOW_PPM / (T_HIGH_PPM + T_LOW_PPM + LOSS_PPM);
}

/// Mirror and mode geometry of the cavity. Transmissions and losses are
/// stored as fractions (not ppm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    pub cavity_length: f64,
    pub waist_probe: f64,
    pub waist_control: f64,
    pub t_high: f64,
    pub t_low: f64,
    pub roundtrip_loss: f64,
}

impl CavityGeometry {
    /// 11.7 mm cavity, 1500/4/650 ppm, 37 µm waists.
    pub fn reference() -> Self {
        Self {
            cavity_length: defaults::CAVITY_LENGTH_MM * 1e-3,
            waist_probe: um(defaults::WAIST_UM),
            waist_control: um(defaults::WAIST_UM),
            t_high: ppm(defaults::T_HIGH_PPM),
            t_low: ppm(defaults::T_LOW_PPM),
            roundtrip_loss: ppm(defaults::LOSS_PPM),
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("cavity_length", self.cavity_length)?;
        require_positive("waist_probe", self.waist_probe)?;
        require_positive("waist_control", self.waist_control)?;
        require_non_negative("t_high", self.t_high)?;
        require_non_negative("t_low", self.t_low)?;
        require_non_negative("roundtrip_loss", self.roundtrip_loss)?;
        if self.total_loss() <= 0.0 {
            return Err(invalid("roundtrip_loss", "total round-trip loss T_H + T_L + A must be > 0"));
        }
        if self.t_high < self.t_low {
            return Err(invalid(
                "t_high",
                format!("incoupling mirror must be the high-transmission one (T_H = {} < T_L = {})", self.t_high, self.t_low),
            ));
        }
        Ok(())
    }

    pub fn total_loss(&self) -> f64 {
        self.t_high + self.t_low + self.roundtrip_loss
    }

    /// β = w_p² / w_c², the exponent relating control to probe mode intensity.
    pub fn beta(&self) -> f64 {
        (self.waist_probe / self.waist_control).powi(2)
    }
}

/// Cavity field amplitude decay rates, rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityRates {
    /// Total decay rate κ.
    pub kappa: f64,
    /// Decay through the incoupling (high-transmission) mirror κ_H.
    pub kappa_h: f64,
    /// Decay through the outcoupling mirror κ_L.
    pub kappa_l: f64,
}

impl CavityRates {
    pub fn new(kappa: f64, kappa_h: f64, kappa_l: f64) -> Result<Self> {
        let rates = Self { kappa, kappa_h, kappa_l };
        rates.validate()?;
        Ok(rates)
    }

    /// Reference cavity: κ/2π = 2.2 MHz, κ_H/κ = 0.696.
    pub fn reference() -> Self {
        let kappa = mhz(defaults::KAPPA_MHZ);
        Self {
            kappa,
            kappa_h: defaults::KAPPA_H_FRACTION * kappa,
            kappa_l: defaults::KAPPA_L_FRACTION * kappa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("kappa", self.kappa)?;
        require_non_negative("kappa_h", self.kappa_h)?;
        require_non_negative("kappa_l", self.kappa_l)?;
        // relative slack for rates derived by floating-point fractions of κ
        if self.kappa_h + self.kappa_l > self.kappa * (1.0 + 1e-12) {
            return Err(invalid("kappa", format!(
                "kappa ({}) must be >= kappa_h + kappa_l ({})",
                self.kappa,
                self.kappa_h + self.kappa_l
            )));
        }
        Ok(())
    }

    /// Decay through everything other than the two mirrors.
    pub fn kappa_loss(&self) -> f64 {
        (self.kappa - self.kappa_h - self.kappa_l).max(0.0)
    }
}

/// Result of [`derive_cavity_rates`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCavity {
    pub rates: CavityRates,
    pub finesse: f64,
}

/// κ_i = c·T_i / (4 ℓ) for each loss channel, κ from the total loss, and
/// finesse 2π / (T_H + T_L + A).
pub fn derive_cavity_rates(geom: &CavityGeometry) -> Result<DerivedCavity> {
    geom.validate()?;
    let per_loss = SPEED_OF_LIGHT / (4.0 * geom.cavity_length);
    let rates = CavityRates {
        kappa: per_loss * geom.total_loss(),
        kappa_h: per_loss * geom.t_high,
        kappa_l: per_loss * geom.t_low,
    };
    Ok(DerivedCavity {
        rates,
        finesse: TAU / geom.total_loss(),
    })
}

/// N = ρ·π·w_p²·L / 2 with L the crystal half-length.
pub fn effective_ion_number(density: f64, waist_probe: f64, half_length: f64) -> Result<f64> {
    require_non_negative("density", density)?;
    require_positive("waist_probe", waist_probe)?;
    require_positive("half_length", half_length)?;
    Ok(density * PI * waist_probe * waist_probe * half_length / 2.0)
}

/// Ion count of a prolate-spheroidal crystal of given full length and diameter.
pub fn total_ion_count(length: f64, diameter: f64, density: f64) -> Result<f64> {
    require_non_negative("length", length)?;
    require_non_negative("diameter", diameter)?;
    require_non_negative("density", density)?;
    let (a, b) = (length / 2.0, diameter / 2.0);
    Ok(density * 4.0 / 3.0 * PI * a * b * b)
}

/// C = g_N² / (2κγ).
pub fn cooperativity(g_n: f64, kappa: f64, gamma: f64) -> Result<f64> {
    require_non_negative("g_n", g_n)?;
    require_positive("kappa", kappa)?;
    require_positive("gamma", gamma)?;
    Ok(g_n * g_n / (2.0 * kappa * gamma))
}

/// g_N = g·√N.
pub fn collective_coupling(g: f64, n_eff: f64) -> f64 {
    g * n_eff.sqrt()
}

/// Ω_c = g_c·√n for n intracavity control photons (the rescaled Rabi
/// frequency is Ω̄_c = ḡ_c·⟨a_c⟩ = Ω_c/√2 with ḡ_c = g_c/√2).
pub fn control_rabi_from_photons(g_c: f64, photons: f64) -> Result<f64> {
    require_non_negative("g_c", g_c)?;
    require_non_negative("photons", photons)?;
    Ok(g_c * photons.sqrt())
}

pub fn control_photons_from_rabi(g_c: f64, omega_c: f64) -> Result<f64> {
    require_positive("g_c", g_c)?;
    require_non_negative("omega_c", omega_c)?;
    Ok((omega_c / g_c).powi(2))
}

/// Atomic ensemble: decay rates and coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams {
    /// Optical dipole decay rate γ.
    pub gamma: f64,
    /// Ground-state decoherence rate γ₀.
    pub gamma0: f64,
    /// Single-ion peak coupling g.
    pub g: f64,
    /// Effective ion number.
    pub n_eff: f64,
}

impl EnsembleParams {
    /// Ensemble described only by its collective coupling: stored as a single
    /// effective emitter with g = g_N.
    pub fn from_collective(gamma: f64, gamma0: f64, g_n: f64) -> Self {
        Self { gamma, gamma0, g: g_n, n_eff: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("gamma", self.gamma)?;
        require_non_negative("gamma0", self.gamma0)?;
        if self.gamma0 >= self.gamma {
            return Err(invalid("gamma0", "ground-state decoherence must be slower than the dipole decay"));
        }
        require_non_negative("g", self.g)?;
        require_non_negative("n_eff", self.n_eff)?;
        Ok(())
    }

    pub fn g_n(&self) -> f64 {
        collective_coupling(self.g, self.n_eff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    /// Control Rabi frequency Ω_c ≥ 0.
    pub omega_c: f64,
    /// Common probe / cavity / two-photon detuning Δ.
    pub delta: f64,
    /// Input probe photon flux |a_in|², photons/s.
    pub input_flux: f64,
}

impl DriveParams {
    pub fn validate(&self) -> Result<()> {
        require_non_negative("omega_c", self.omega_c)?;
        if !self.delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        require_non_negative("input_flux", self.input_flux)
    }

    pub fn input_amplitude(&self) -> f64 {
        self.input_flux.sqrt()
    }
}

/// Everything a model evaluation needs. Immutable once built; the `with_*`
/// methods return modified copies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub cavity: CavityRates,
    pub ensemble: EnsembleParams,
    pub drive: DriveParams,
    /// w_p² / w_c².
    pub beta: f64,
    g_n: f64,
    cooperativity: f64,
}

impl SystemParams {
    pub fn new(cavity: CavityRates, ensemble: EnsembleParams, drive: DriveParams, beta: f64) -> Result<Self> {
        cavity.validate()?;
        ensemble.validate()?;
        drive.validate()?;
        require_positive("beta", beta)?;
        let g_n = ensemble.g_n();
        let cooperativity = cooperativity(g_n, cavity.kappa, ensemble.gamma)?;
        Ok(Self { cavity, ensemble, drive, beta, g_n, cooperativity })
    }

    /// Reference cavity and ensemble rates with the given collective
    /// coupling and control Rabi frequency (both rad/s), Δ = 0, one probe
    /// photon per µs, β = 1.
    pub fn reference(g_n: f64, omega_c: f64) -> Self {
        let ensemble = EnsembleParams::from_collective(mhz(defaults::GAMMA_MHZ), khz(defaults::GAMMA0_KHZ), g_n);
        let drive = DriveParams { omega_c, delta: 0.0, input_flux: 1e6 };
        Self::new(CavityRates::reference(), ensemble, drive, 1.0).expect("reference parameters are valid")
    }

    /// Reference rates with g_N chosen to give the requested cooperativity.
    pub fn reference_with_cooperativity(c: f64, omega_c: f64) -> Self {
        let g_n = (2.0 * c * CavityRates::reference().kappa * mhz(defaults::GAMMA_MHZ)).sqrt();
        Self::reference(g_n, omega_c)
    }

    pub fn g_n(&self) -> f64 {
        self.g_n
    }

    pub fn cooperativity(&self) -> f64 {
        self.cooperativity
    }

    pub fn kappa(&self) -> f64 {
        self.cavity.kappa
    }

    pub fn gamma(&self) -> f64 {
        self.ensemble.gamma
    }

    pub fn gamma0(&self) -> f64 {
        self.ensemble.gamma0
    }

    pub fn omega_c(&self) -> f64 {
        self.drive.omega_c
    }

    pub fn delta(&self) -> f64 {
        self.drive.delta
    }

    pub fn with_omega_c(&self, omega_c: f64) -> Result<Self> {
        Self::new(self.cavity, self.ensemble, DriveParams { omega_c, ..self.drive }, self.beta)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.cavity, self.ensemble, DriveParams { delta, ..self.drive }, self.beta)
    }

    pub fn with_gamma0(&self, gamma0: f64) -> Result<Self> {
        Self::new(self.cavity, EnsembleParams { gamma0, ..self.ensemble }, self.drive, self.beta)
    }

    pub fn with_input_flux(&self, input_flux: f64) -> Result<Self> {
        Self::new(self.cavity, self.ensemble, DriveParams { input_flux, ..self.drive }, self.beta)
    }

    /// Replaces the collective coupling, keeping the single-ion g when the
    /// ensemble carries one (n_eff is adjusted).
    pub fn with_g_n(&self, g_n: f64) -> Result<Self> {
        require_non_negative("g_n", g_n)?;
        let ensemble = if self.ensemble.g > 0.0 && self.ensemble.n_eff != 1.0 {
            EnsembleParams { n_eff: (g_n / self.ensemble.g).powi(2), ..self.ensemble }
        } else {
            EnsembleParams { g: g_n, n_eff: 1.0, ..self.ensemble }
        };
        Self::new(self.cavity, ensemble, self.drive, self.beta)
    }

    pub fn with_n_eff(&self, n_eff: f64) -> Result<Self> {
        Self::new(self.cavity, EnsembleParams { n_eff, ..self.ensemble }, self.drive, self.beta)
    }

    pub fn with_ensemble(&self, ensemble: EnsembleParams) -> Result<Self> {
        Self::new(self.cavity, ensemble, self.drive, self.beta)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.cavity, self.ensemble, self.drive, beta)
    }
}

/// Crystal description used to derive N_eff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrystalShape {
    /// Ion density, m⁻³.
    pub density: f64,
    /// Half-length along the cavity axis, m.
    pub half_length: f64,
}

impl CrystalShape {
    /// Density in cm⁻³ and full length in µm.
    pub fn from_lab_units(density_cm3: f64, length_um: f64) -> Self {
        Self { density: per_cm3(density_cm3), half_length: um(length_um) / 2.0 }
    }
}

/// Mixed direct / apparatus-level inputs. Direct rates win over derived ones;
/// disagreements beyond 1% are reported as warnings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterSources {
    pub kappa: Option<f64>,
    pub kappa_h: Option<f64>,
    pub kappa_l: Option<f64>,
    pub geometry: Option<CavityGeometry>,
    pub gamma: Option<f64>,
    pub gamma0: Option<f64>,
    pub g_n: Option<f64>,
    pub single_ion_g: Option<f64>,
    pub n_eff: Option<f64>,
    pub crystal: Option<CrystalShape>,
    pub omega_c: Option<f64>,
    pub control_coupling: Option<f64>,
    pub control_photons: Option<f64>,
    pub delta: Option<f64>,
    pub input_flux: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedParams {
    pub params: SystemParams,
    pub finesse: Option<f64>,
    pub warnings: Vec<String>,
}

fn check_consistency(warnings: &mut Vec<String>, what: &str, direct: f64, derived: f64) {
    let scale = direct.abs().max(derived.abs());
    if scale > 0.0 && (direct - derived).abs() > 0.01 * scale {
        let msg = format!("{what}: direct value {direct:.6e} differs from derived value {derived:.6e}; using the direct value");
        warn!("{msg}");
        warnings.push(msg);
    }
}

impl ParameterSources {
    pub fn resolve(&self) -> Result<ResolvedParams> {
        let mut warnings = Vec::new();
        let derived = self.geometry.as_ref().map(derive_cavity_rates).transpose()?;

        let reference = CavityRates::reference();
        let kappa = match (self.kappa, derived) {
            (Some(k), Some(d)) => {
                check_consistency(&mut warnings, "kappa", k, d.rates.kappa);
                k
            }
            (Some(k), None) => k,
            (None, Some(d)) => d.rates.kappa,
            (None, None) => reference.kappa,
        };
        let share = |direct: Option<f64>, from_geom: Option<f64>, fraction: f64, name: &str, warnings: &mut Vec<String>| match (direct, from_geom) {
            (Some(v), Some(d)) => {
                check_consistency(warnings, name, v, d);
                v
            }
            (Some(v), None) => v,
            (None, Some(d)) => d / derived.unwrap().rates.kappa * kappa,
            (None, None) => fraction * kappa,
        };
        let kappa_h = share(self.kappa_h, derived.map(|d| d.rates.kappa_h), defaults::KAPPA_H_FRACTION, "kappa_h", &mut warnings);
        let kappa_l = share(self.kappa_l, derived.map(|d| d.rates.kappa_l), defaults::KAPPA_L_FRACTION, "kappa_l", &mut warnings);
        let cavity = CavityRates::new(kappa, kappa_h, kappa_l)?;

        let gamma = self.gamma.unwrap_or(mhz(defaults::GAMMA_MHZ));
        let gamma0 = self.gamma0.unwrap_or(khz(defaults::GAMMA0_KHZ));

        let waist_probe = self.geometry.map(|g| g.waist_probe).unwrap_or(um(defaults::WAIST_UM));
        let n_from_crystal = self
            .crystal
            .map(|c| effective_ion_number(c.density, waist_probe, c.half_length))
            .transpose()?;
        let n_eff = match (self.n_eff, n_from_crystal) {
            (Some(n), Some(d)) => {
                check_consistency(&mut warnings, "n_eff", n, d);
                Some(n)
            }
            (a, b) => a.or(b),
        };
        let ensemble = match (self.g_n, self.single_ion_g, n_eff) {
            (Some(g_n), Some(g), Some(n)) => {
                check_consistency(&mut warnings, "g_n", g_n, collective_coupling(g, n));
                EnsembleParams::from_collective(gamma, gamma0, g_n)
            }
            (Some(g_n), _, _) => EnsembleParams::from_collective(gamma, gamma0, g_n),
            (None, Some(g), Some(n)) => EnsembleParams { gamma, gamma0, g, n_eff: n },
            _ => {
                return Err(invalid(
                    "g_n",
                    "collective coupling needs either g_n or a single-ion g together with n_eff or a crystal shape",
                ))
            }
        };

        let omega_from_photons = match (self.control_coupling, self.control_photons) {
            (Some(g_c), Some(n)) => Some(control_rabi_from_photons(g_c, n)?),
            (None, Some(_)) => {
                return Err(invalid("control_coupling", "converting control photons to a Rabi frequency needs g_c"))
            }
            _ => None,
        };
        let omega_c = match (self.omega_c, omega_from_photons) {
            (Some(o), Some(d)) => {
                check_consistency(&mut warnings, "omega_c", o, d);
                o
            }
            (a, b) => a.or(b).unwrap_or(0.0),
        };
        let drive = DriveParams {
            omega_c,
            delta: self.delta.unwrap_or(0.0),
            input_flux: self.input_flux.unwrap_or(1e6),
        };
        let beta = self.beta.or(self.geometry.map(|g| g.beta())).unwrap_or(1.0);
        let params = SystemParams::new(cavity, ensemble, drive, beta)?;
        Ok(ResolvedParams { params, finesse: derived.map(|d| d.finesse), warnings })
    }
}
