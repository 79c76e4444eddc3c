//! Steady-state cavity response: intracavity amplitude, reflectivity and
//! transmittivity spectra, and the features read off them.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{invalid, require_positive, Error, Result};
use crate::exec::Execution;
use crate::params::{CavityRates, SystemParams};
use crate::susceptibility::{theta, SaturationTheta, SusceptibilityModel, Variant};
use crate::units::{khz, mhz};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Sweep grid: symmetric span ±`half_span` with spacing `step`, both rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub half_span: f64,
    pub step: f64,
}

impl Grid {
    /// ±25 MHz in 5 kHz steps.
    pub fn full() -> Self {
        Self { half_span: mhz(25.0), step: khz(5.0) }
    }

    /// ±1 MHz in 0.2 kHz steps.
    pub fn dip() -> Self {
        Self { half_span: mhz(1.0), step: khz(0.2) }
    }

    pub fn range(&self) -> (f64, f64) {
        (-self.half_span, self.half_span)
    }
}

/// Grid points lo, lo+step, … up to and including hi (within 1e-9 steps).
pub fn grid_points(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    require_positive("step", step)?;
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
        return Err(invalid("range", format!("need finite lo <= hi, got [{lo}, {hi}]")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    if n > 50_000_000 {
        return Err(invalid("step", format!("grid of {n} points is too large")));
    }
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

/// a = √(2κ_H)·a_in/(κ − iΔ − iχ).
pub fn intracavity_amplitude(delta: f64, chi: Complex64, kappa: f64, kappa_h: f64, a_in: Complex64) -> Complex64 {
    (2.0 * kappa_h).sqrt() * a_in / (Complex64::new(kappa, -delta) - I * chi)
}

/// (R, T) = (|√(2κ_H)a/a_in − 1|², 2κ_L|a|²/|a_in|²).
pub fn reflectivity_transmittivity(delta: f64, chi: Complex64, rates: &CavityRates, a_in: Complex64) -> Result<(f64, f64)> {
    let r = CavityResponse::new(delta, chi, rates, a_in)?;
    Ok((r.reflectivity, r.transmittivity))
}

/// Full steady-state response at one detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityResponse {
    pub amplitude: Complex64,
    pub reflectivity: f64,
    pub transmittivity: f64,
    /// Fraction of the input lost through the mirror/scatter loss channel.
    pub cavity_loss: f64,
    /// Fraction of the input absorbed by the ensemble, 2Re(−iχ)|a|²/|a_in|².
    pub absorbed: f64,
}

impl CavityResponse {
    pub fn new(delta: f64, chi: Complex64, rates: &CavityRates, a_in: Complex64) -> Result<Self> {
        if a_in == Complex64::new(0.0, 0.0) {
            return Err(Error::ZeroInput);
        }
        let amplitude = intracavity_amplitude(delta, chi, rates.kappa, rates.kappa_h, a_in);
        let ratio = amplitude.norm_sqr() / a_in.norm_sqr();
        Ok(Self {
            amplitude,
            reflectivity: ((2.0 * rates.kappa_h).sqrt() * amplitude / a_in - 1.0).norm_sqr(),
            transmittivity: 2.0 * rates.kappa_l * ratio,
            cavity_loss: 2.0 * rates.kappa_loss() * ratio,
            absorbed: 2.0 * (-I * chi).re * ratio,
        })
    }

    /// R + T + losses; 1 for any passive medium.
    pub fn balance(&self) -> f64 {
        self.reflectivity + self.transmittivity + self.cavity_loss + self.absorbed
    }
}

/// Steady-state response of `params` at `delta` under `model`.
pub fn response(params: &SystemParams, model: &SusceptibilityModel, delta: f64) -> Result<CavityResponse> {
    let chi = model.chi(params, delta)?;
    CavityResponse::new(delta, chi.value, &params.cavity, Complex64::new(params.drive.input_amplitude(), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    /// Probe detuning, rad/s.
    pub delta: f64,
    pub reflectivity: f64,
    pub transmittivity: f64,
    pub photon_number: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub rows: Vec<SpectrumRow>,
    pub variant: Variant,
}

pub const SPECTRUM_CSV_HEADER: &str = "delta_hz,reflectivity,transmittivity,photon_number";

impl SpectrumTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta).collect()
    }

    pub fn reflectivities(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.reflectivity).collect()
    }

    pub fn transmittivities(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.transmittivity).collect()
    }

    /// Strict interior local minima of R, as (Δ, R).
    pub fn reflectivity_minima(&self) -> Vec<(f64, f64)> {
        self.rows
            .windows(3)
            .filter(|w| w[1].reflectivity < w[0].reflectivity && w[1].reflectivity < w[2].reflectivity)
            .map(|w| (w[1].delta, w[1].reflectivity))
            .collect()
    }

    /// CSV with Δ in linear Hz and 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(SPECTRUM_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e}",
                r.delta / TAU,
                r.reflectivity,
                r.transmittivity,
                r.photon_number
            );
        }
        out
    }
}

/// Sweeps Δ over [lo, hi] in steps of `step` (rad/s). For the closed-form
/// continuous model, each step is checked for a jump across the cut of the
/// complex logarithm.
pub fn scan_spectrum(params: &SystemParams, range: (f64, f64), step: f64, model: &SusceptibilityModel, exec: Execution) -> Result<SpectrumTable> {
    let deltas = grid_points(range.0, range.1, step)?;
    if matches!(model, SusceptibilityModel::Continuous) && params.beta == 1.0 {
        check_branch_continuity(params, &deltas)?;
    }
    let a_in = Complex64::new(params.drive.input_amplitude(), 0.0);
    let rows = exec.try_map(&deltas, |&delta| {
        let chi = model.chi(params, delta)?;
        let r = CavityResponse::new(delta, chi.value, &params.cavity, a_in)?;
        Ok(SpectrumRow {
            delta,
            reflectivity: r.reflectivity,
            transmittivity: r.transmittivity,
            photon_number: r.amplitude.norm_sqr(),
        })
    })?;
    Ok(SpectrumTable { rows, variant: model.variant() })
}

fn check_branch_continuity(params: &SystemParams, deltas: &[f64]) -> Result<()> {
    let mut prev: Option<SaturationTheta> = None;
    for &delta in deltas {
        let t = theta(delta, params.gamma(), params.gamma0(), params.omega_c())?;
        if !t.branch_safe() {
            return Err(Error::BranchCut { delta });
        }
        if let Some(p) = prev {
            if p.crosses_cut_to(t) {
                return Err(Error::BranchCut { delta });
            }
        }
        prev = Some(t);
    }
    Ok(())
}

/// The narrow transparency window around two-photon resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipFeature {
    /// rad/s
    pub center: f64,
    /// rad/s
    pub hwhm: f64,
    pub depth: f64,
    /// R at Δ = 0 without control.
    pub baseline: f64,
}

/// Bisection tolerance on the half-maximum detuning, rad/s (1 Hz).
pub const DIP_TOLERANCE: f64 = TAU;

/// Measures the dip at Δ = 0: baseline is the no-control R(0), the half
/// level is R_min + (baseline − R_min)/2, and the crossing is bracketed by
/// doubling Δ and then bisected to 1 Hz.
pub fn transparency_dip(params: &SystemParams, model: &SusceptibilityModel) -> Result<DipFeature> {
    require_positive("omega_c", params.omega_c())?;
    let reflect = |p: &SystemParams, delta: f64| response(p, model, delta).map(|r| r.reflectivity);
    let baseline = reflect(&params.with_omega_c(0.0)?, 0.0)?;
    let r_min = reflect(params, 0.0)?;
    let depth = baseline - r_min;
    if !(depth >= 1e-6 * baseline) {
        return Err(Error::NoDip { depth, baseline });
    }
    let half = r_min + 0.5 * depth;
    let (mut lo, mut hi) = (0.0, DIP_TOLERANCE);
    while reflect(params, hi)? < half {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 * params.gamma().max(params.kappa()) {
            return Err(Error::NoDip { depth, baseline });
        }
    }
    while hi - lo > DIP_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if reflect(params, mid)? < half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DipFeature { center: 0.0, hwhm: 0.5 * (lo + hi), depth, baseline })
}

/// |a(with ensemble)/a(empty cavity)|² at Δ = 0.
pub fn atomic_transparency(params: &SystemParams, model: &SusceptibilityModel) -> Result<f64> {
    let chi = model.chi(params, 0.0)?.value;
    let kappa = params.kappa();
    Ok((kappa / (kappa - I * chi)).norm_sqr())
}

/// Which closed form of the EIT linewidth to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinewidthForm {
    /// γ₀ + Ω_c²/(2γ(1+2C)), rad/s.
    #[default]
    Corrected,
    /// γ₀ + (Ω_c²/2)/(1+2C) taken literally. The two terms have different
    /// units; kept only to show the mismatch.
    AsPrinted,
}

/// Predicted EIT linewidth for homogeneous control.
pub fn eit_linewidth(params: &SystemParams, form: LinewidthForm) -> f64 {
    let (omega, c) = (params.omega_c(), params.cooperativity());
    match form {
        LinewidthForm::Corrected => params.gamma0() + omega * omega / (2.0 * params.gamma() * (1.0 + 2.0 * c)),
        LinewidthForm::AsPrinted => params.gamma0() + 0.5 * omega * omega / (1.0 + 2.0 * c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{to_khz, to_mhz};

    fn a_in() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn bare_resonant_cavity() {
        let rates = CavityRates::reference();
        let a = intracavity_amplitude(0.0, Complex64::new(0.0, 0.0), rates.kappa, rates.kappa_h, a_in());
        assert!((a.re - (2.0 * rates.kappa_h).sqrt() / rates.kappa).abs() < 1e-15 * a.re);
        assert!((a.norm_sqr() - 2.0 * rates.kappa_h / rates.kappa.powi(2)).abs() < 1e-12 * a.norm_sqr());
        let (r, _) = reflectivity_transmittivity(0.0, Complex64::new(0.0, 0.0), &rates, a_in()).unwrap();
        assert!((r - (2.0 * 0.696 - 1.0f64).powi(2)).abs() < 1e-9, "{r}");
        assert!((r - 0.154).abs() < 1e-3);
    }

    #[test]
    fn two_level_medium_scales_amplitude_by_one_plus_2c() {
        let p = SystemParams::reference(mhz(13.6), 0.0);
        let chi = I * p.g_n() * p.g_n() / p.gamma();
        let bare = intracavity_amplitude(0.0, Complex64::new(0.0, 0.0), p.kappa(), p.cavity.kappa_h, a_in());
        let loaded = intracavity_amplitude(0.0, chi, p.kappa(), p.cavity.kappa_h, a_in());
        assert!(((bare / loaded).re - (1.0 + 2.0 * p.cooperativity())).abs() < 1e-12);
    }

    #[test]
    fn far_detuned_and_impedance_matched_limits() {
        let rates = CavityRates::reference();
        let (r, t) = reflectivity_transmittivity(mhz(1e5), Complex64::new(0.0, 0.0), &rates, a_in()).unwrap();
        assert!(r > 1.0 - 1e-6 && t < 1e-6);
        let a = intracavity_amplitude(mhz(1e6), Complex64::new(0.0, 0.0), rates.kappa, rates.kappa_h, a_in());
        assert!(a.norm() < 1e-9);
        let matched = CavityRates::new(mhz(2.0), mhz(1.0), 0.0).unwrap();
        let (r, t) = reflectivity_transmittivity(0.0, Complex64::new(0.0, 0.0), &matched, a_in()).unwrap();
        assert!(r < 1e-30 && t == 0.0);
    }

    #[test]
    fn zero_input_is_an_error() {
        let err = reflectivity_transmittivity(0.0, Complex64::new(0.0, 0.0), &CavityRates::reference(), Complex64::new(0.0, 0.0));
        assert_eq!(err.unwrap_err(), Error::ZeroInput);
    }

    #[test]
    fn normal_modes_without_control() {
        let p = SystemParams::reference(mhz(13.9), 0.0);
        let table = scan_spectrum(&p, Grid::full().range(), khz(20.0), &SusceptibilityModel::Continuous, Execution::Sequential).unwrap();
        let minima = table.reflectivity_minima();
        assert_eq!(minima.len(), 2, "{minima:?}");
        // with γ comparable to g_N the broadened modes sit somewhat inside ±g_N
        assert!((minima[0].0 + minima[1].0).abs() < khz(1.0));
        let split = to_mhz(minima[1].0);
        assert!(split > 0.7 * 13.9 && split < 13.9, "{split}");
    }

    #[test]
    fn empty_cavity_is_a_single_lorentzian_of_width_kappa() {
        let p = SystemParams::reference(0.0, 0.0);
        let table = scan_spectrum(&p, (mhz(-10.0), mhz(10.0)), khz(10.0), &SusceptibilityModel::Continuous, Execution::Sequential).unwrap();
        assert_eq!(table.reflectivity_minima(), vec![(table.rows[1000].delta, table.rows[1000].reflectivity)]);
        let r0 = table.rows[1000].reflectivity;
        let (r_k, _) = reflectivity_transmittivity(p.kappa(), Complex64::new(0.0, 0.0), &p.cavity, a_in()).unwrap();
        // half depth at Δ = κ
        assert!(((1.0 - r_k) - 0.5 * (1.0 - r0)).abs() < 1e-12);
    }

    #[test]
    fn transparency_dip_matches_the_measured_width() {
        let p = SystemParams::reference(mhz(13.6), mhz(4.1));
        let dip = transparency_dip(&p, &SusceptibilityModel::Continuous).unwrap();
        let hwhm = to_khz(dip.hwhm);
        assert!((hwhm - 47.5).abs() <= 0.2 * 47.5, "{hwhm}");
        assert!(dip.depth > 0.0 && dip.depth <= dip.baseline);
        let wider = transparency_dip(&p.with_omega_c(mhz(8.2)).unwrap(), &SusceptibilityModel::Continuous).unwrap();
        assert!(wider.hwhm > dip.hwhm);
    }

    #[test]
    fn canonical_dip_follows_the_corrected_linewidth() {
        let p = SystemParams::reference_with_cooperativity(50.0, mhz(2.0)).with_gamma0(0.0).unwrap();
        let dip = transparency_dip(&p, &SusceptibilityModel::Canonical).unwrap();
        let predicted = eit_linewidth(&p, LinewidthForm::Corrected);
        assert!((dip.hwhm / predicted - 1.0).abs() < 0.05, "{} vs {}", to_khz(dip.hwhm), to_khz(predicted));
    }

    #[test]
    fn no_dip_without_ensemble() {
        let p = SystemParams::reference(0.0, mhz(4.1));
        assert!(matches!(transparency_dip(&p, &SusceptibilityModel::Continuous), Err(Error::NoDip { .. })));
        assert!(transparency_dip(&SystemParams::reference(mhz(13.6), 0.0), &SusceptibilityModel::Continuous).is_err());
    }

    #[test]
    fn atomic_transparency_with_and_without_control() {
        let p = SystemParams::reference(mhz(13.6), 0.0);
        let off = atomic_transparency(&p, &SusceptibilityModel::Continuous).unwrap();
        assert!((off - 1.0 / (1.0 + 2.0 * p.cooperativity()).powi(2)).abs() < 1e-12);
        assert!((off - 0.02).abs() < 0.01, "{off}");
        let on = atomic_transparency(&p.with_omega_c(mhz(4.1)).unwrap(), &SusceptibilityModel::Continuous).unwrap();
        assert!((on - 0.84).abs() <= 0.06, "{on}");
        let empty = atomic_transparency(&SystemParams::reference(0.0, mhz(4.1)), &SusceptibilityModel::Continuous).unwrap();
        assert_eq!(empty, 1.0);
    }

    #[test]
    fn as_printed_linewidth_differs_from_corrected() {
        let p = SystemParams::reference(mhz(13.6), mhz(4.1));
        let a = eit_linewidth(&p, LinewidthForm::Corrected);
        let b = eit_linewidth(&p, LinewidthForm::AsPrinted);
        assert!(b / a > 1e6);
    }

    #[test]
    fn csv_layout() {
        let p = SystemParams::reference(mhz(13.6), mhz(4.1));
        let table = scan_spectrum(&p, (mhz(-1.0), mhz(1.0)), mhz(1.0), &SusceptibilityModel::Canonical, Execution::Sequential).unwrap();
        let csv = table.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], SPECTRUM_CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("-1.00000000000e6,"));
        assert!(lines[2].starts_with("0.00000000000e0,"));
    }

    #[test]
    fn grid_includes_both_ends() {
        let g = grid_points(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(g, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(grid_points(1.0, -1.0, 0.5).is_err());
        assert!(grid_points(0.0, 1.0, 0.0).is_err());
        assert_eq!(Grid::full().range(), (-mhz(25.0), mhz(25.0)));
        assert_eq!(grid_points(-Grid::dip().half_span, Grid::dip().half_span, Grid::dip().step).unwrap().len(), 10_001);
    }
}
