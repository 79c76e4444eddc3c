//! Published parameter sets used for figure reproduction. Frequencies are
//! linear MHz unless noted.

use crate::params::{EnsembleParams, SystemParams};
use crate::units::mhz;

/// Crystal of the single-crystal spectra: collective coupling and the
/// control Rabi frequency of the transparency measurement.
pub const SPECTRA_G_N_MHZ: f64 = 13.6;
pub const SPECTRA_OMEGA_MHZ: f64 = 4.1;
/// Collective coupling of the reflection fit without control.
pub const NORMAL_MODE_G_N_MHZ: f64 = 13.9;

/// Measured transparency figures for the spectra crystal.
pub const TRANSPARENCY_OFF: f64 = 0.02;
pub const TRANSPARENCY_ON: f64 = 0.84;
pub const DIP_HWHM_KHZ: f64 = 47.5;

/// Larger crystal of the power scan: globally fitted coupling and the
/// fitted control Rabi frequencies.
pub const POWER_SCAN_G_N_MHZ: f64 = 16.2;
pub const POWER_SCAN_OMEGAS_MHZ: [f64; 4] = [1.18, 3.23, 5.91, 8.62];

/// Simulated buildup family.
pub const SIM_COOPERATIVITY: f64 = 5.4;
pub const SIM_OMEGAS_MHZ: [f64; 5] = [1.0, 3.0, 5.0, 7.0, 9.0];
pub const SIM_ALPHA: f64 = 2.19;

/// Width-scan grid, from the weak-control end up to the strongest drive.
pub const WIDTH_SCAN_OMEGAS_MHZ: [f64; 11] = [0.2, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
/// Measured width slope, per 2π·MHz, and offset, kHz.
pub const WIDTH_SLOPE_PER_MHZ: f64 = 1.7e-3;
pub const WIDTH_OFFSET_KHZ: f64 = 0.9;

/// Ion-number scan.
pub const N_SCAN_IONS: [f64; 5] = [393.0, 590.0, 737.0, 938.0, 1112.0];
pub const N_SCAN_DYNAMICS_IONS: [f64; 5] = [366.0, 575.0, 738.0, 947.0, 1047.0];
pub const N_SCAN_OMEGA_MHZ: f64 = 3.5;
/// Expected coupling and ion number of the power-scan crystal, which fix
/// the single-ion coupling used for the ion-number scan.
pub const REFERENCE_CRYSTAL_G_N_MHZ: f64 = 16.6;
pub const REFERENCE_CRYSTAL_IONS: f64 = 890.0;

/// Single-ion peak coupling g (rad/s), thermal averaging included.
pub fn single_ion_coupling() -> f64 {
    mhz(REFERENCE_CRYSTAL_G_N_MHZ) / REFERENCE_CRYSTAL_IONS.sqrt()
}

/// Reference rates with an ensemble of `n_eff` ions of coupling
/// [`single_ion_coupling`].
pub fn crystal(n_eff: f64, omega_c: f64) -> SystemParams {
    let base = SystemParams::reference(0.0, omega_c);
    let ensemble = EnsembleParams { g: single_ion_coupling(), n_eff, ..base.ensemble };
    base.with_ensemble(ensemble).expect("preset crystal is valid")
}
