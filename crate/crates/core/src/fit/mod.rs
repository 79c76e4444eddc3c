//! Parameter extraction from spectra and traces.

pub mod lm;
mod report;

use crate::dynamics::{self, DynamicsTrace, ShellDiscretization};
use crate::error::{invalid, require_positive, Error, Result};
use crate::exec::Execution;
use crate::params::SystemParams;
use crate::spectrum::{self, CavityResponse, SpectrumTable};
use crate::susceptibility::SusceptibilityModel;
use crate::units::us;

pub use lm::{minimize, minimize_scaled, LmOptions, LmOutcome};
pub use report::{FIT_CSV_HEADER, N_SCAN_CSV_HEADER, SCALING_CSV_HEADER};

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    /// 1σ from the linearised covariance.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub estimates: Vec<Estimate>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub points: usize,
}

impl FitResult {
    fn from_outcome(names: &[String], out: &LmOutcome, points: usize) -> Self {
        let estimates = names
            .iter()
            .zip(out.params.iter().zip(out.sigmas()))
            .map(|(name, (&value, sigma))| Estimate { name: name.clone(), value, sigma })
            .collect();
        Self { estimates, rss: out.rss, iterations: out.iterations, converged: out.converged, points }
    }

    pub fn get(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    /// Value of a named estimate; panics if the fit has no such parameter.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("fit has no parameter `{name}`")).value
    }

    pub fn sigma(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("fit has no parameter `{name}`")).sigma
    }
}

fn run_lm<F>(names: Vec<String>, f: F, x0: &[f64], typical: &[f64], points: usize, opts: &LmOptions) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let out = minimize_scaled(f, x0, typical, opts)?;
    if !out.converged {
        return Err(Error::FitNotConverged { iterations: out.iterations, rss: out.rss });
    }
    Ok(FitResult::from_outcome(&names, &out, points))
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// R(Δ) = baseline − depth/(1 + ((Δ − center)/hwhm)²).
pub fn lorentzian_dip(delta: f64, center: f64, hwhm: f64, depth: f64, baseline: f64) -> f64 {
    let x = (delta - center) / hwhm;
    baseline - depth / (1.0 + x * x)
}

/// Lorentzian dip fit to the reflectivity column. Estimates are named
/// `center`, `hwhm` (rad/s), `depth` and `baseline`.
pub fn fit_lorentzian(spectrum: &SpectrumTable) -> Result<FitResult> {
    fit_lorentzian_with(spectrum, &LmOptions::default())
}

pub fn fit_lorentzian_with(spectrum: &SpectrumTable, opts: &LmOptions) -> Result<FitResult> {
    let n = spectrum.len();
    if n < 5 {
        return Err(Error::InsufficientData { needed: 5, got: n });
    }
    let d = spectrum.deltas();
    let r = spectrum.reflectivities();
    let (imin, &rmin) = r.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let baseline = 0.5 * (r[0] + r[n - 1]);
    let depth = baseline - rmin;
    if !(depth > 0.0) {
        return Err(Error::DegenerateFit("spectrum has no dip below its edges".into()));
    }
    let half = rmin + 0.5 * depth;
    let right = (imin..n).find(|&i| r[i] >= half).map(|i| d[i] - d[imin]);
    let left = (0..=imin).rev().find(|&i| r[i] >= half).map(|i| d[imin] - d[i]);
    let hwhm = match (left, right) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 0.1 * (d[n - 1] - d[0]),
    }
    .max(0.5 * (d[n - 1] - d[0]) / n as f64);
    let x0 = [d[imin], hwhm, depth, baseline];
    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        Ok(d.iter().zip(&r).map(|(&x, &y)| lorentzian_dip(x, p[0], p[1], p[2], p[3]) - y).collect())
    };
    let mut fit = run_lm(names(&["center", "hwhm", "depth", "baseline"]), residuals, &x0, &[hwhm, hwhm, depth, baseline.abs().max(depth)], n, opts)?;
    fit.estimates[1].value = fit.estimates[1].value.abs();
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Observable {
    #[default]
    Reflectivity,
    Transmittivity,
}

impl Observable {
    fn read(self, r: &CavityResponse) -> f64 {
        match self {
            Observable::Reflectivity => r.reflectivity,
            Observable::Transmittivity => r.transmittivity,
        }
    }
}

/// Per-dataset control Rabi frequency: fitted or held fixed. Ω_c = 0
/// datasets must be fixed, since the model depends on Ω_c only through Ω_c².
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlRabi {
    Free(f64),
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct GlobalFitSpec {
    /// Supplies the fixed rates κ, κ_H, κ_L, γ, γ₀ and β.
    pub base: SystemParams,
    pub model: SusceptibilityModel,
    pub observable: Observable,
    pub g_n_guess: f64,
    /// One entry per dataset.
    pub control: Vec<ControlRabi>,
    pub options: LmOptions,
}

/// Joint fit of the full cavity model to several spectra sharing g_N.
/// Estimates are `g_n` then `omega_c_<k>` for each free dataset k (rad/s).
pub fn fit_spectrum_global(datasets: &[SpectrumTable], spec: &GlobalFitSpec) -> Result<FitResult> {
    if datasets.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if spec.control.len() != datasets.len() {
        return Err(invalid("control", format!("{} control entries for {} datasets", spec.control.len(), datasets.len())));
    }
    require_positive("g_n_guess", spec.g_n_guess)?;
    let mut x0 = vec![spec.g_n_guess];
    let mut labels = vec!["g_n".to_string()];
    for (k, c) in spec.control.iter().enumerate() {
        if let ControlRabi::Free(guess) = *c {
            require_positive("omega_c guess", guess)?;
            x0.push(guess);
            labels.push(format!("omega_c_{k}"));
        }
    }
    let points: usize = datasets.iter().map(SpectrumTable::len).sum();
    let a_in = Complex64::new(spec.base.drive.input_amplitude(), 0.0);
    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(points);
        let mut free = p[1..].iter();
        let with_g = spec.base.with_g_n(p[0].abs())?;
        for (table, control) in datasets.iter().zip(&spec.control) {
            let omega = match *control {
                ControlRabi::Free(_) => free.next().expect("one value per free dataset").abs(),
                ControlRabi::Fixed(v) => v,
            };
            let params = with_g.with_omega_c(omega)?;
            for row in &table.rows {
                let chi = spec.model.chi(&params, row.delta)?;
                let resp = CavityResponse::new(row.delta, chi.value, &params.cavity, a_in)?;
                let observed = match spec.observable {
                    Observable::Reflectivity => row.reflectivity,
                    Observable::Transmittivity => row.transmittivity,
                };
                out.push(spec.observable.read(&resp) - observed);
            }
        }
        Ok(out)
    };
    let typical: Vec<f64> = x0.iter().map(|x| x.abs()).collect();
    let mut fit = run_lm(labels, residuals, &x0, &typical, points, &spec.options)?;
    for e in &mut fit.estimates {
        e.value = e.value.abs();
    }
    Ok(fit)
}

/// Time window [start, end] (s) for the exponential buildup fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildupWindow {
    pub start: f64,
    pub end: f64,
}

impl BuildupWindow {
    /// From t₁ = 5/κ, skipping the bare-cavity transient, to
    /// t₂ = min(3 µs, first time R has covered 90% of its drop from R(t₁)
    /// to the steady-state value `r_steady`).
    pub fn standard(kappa: f64, trace: &DynamicsTrace, r_steady: f64) -> Result<Self> {
        require_positive("kappa", kappa)?;
        let start = 5.0 / kappa;
        let r1 = trace
            .rows
            .iter()
            .find(|row| row.t >= start)
            .map(|row| row.reflectivity)
            .ok_or(Error::InsufficientData { needed: 5, got: 0 })?;
        let target = r1 - 0.9 * (r1 - r_steady);
        let falling = r1 >= r_steady;
        let crossing = trace.rows.iter().find(|row| {
            row.t >= start && if falling { row.reflectivity <= target } else { row.reflectivity >= target }
        });
        let end = crossing.map_or(us(3.0), |row| row.t.min(us(3.0)));
        Ok(Self { start, end: end.max(start) })
    }

    /// [`BuildupWindow::standard`] with the steady state of the shell model
    /// that produced the trace.
    pub fn for_model(params: &SystemParams, shells: &ShellDiscretization, trace: &DynamicsTrace) -> Result<Self> {
        let r_steady = spectrum::response(params, &SusceptibilityModel::Shells(shells.clone()), params.delta())?.reflectivity;
        Self::standard(params.kappa(), trace, r_steady)
    }
}

/// Fits R(t) = b·e^(−2γ_EIT t) over the window. Estimates `b` and
/// `gamma_eit` (rad/s).
pub fn fit_exponential_buildup(trace: &DynamicsTrace, window: BuildupWindow) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = trace
        .rows
        .iter()
        .filter(|r| r.t >= window.start * (1.0 - 1e-12) && r.t <= window.end * (1.0 + 1e-12))
        .map(|r| (r.t, r.reflectivity))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData { needed: 5, got: pts.len() });
    }
    // log-linear regression for the starting point
    let positive: Vec<(f64, f64)> = pts.iter().filter(|p| p.1 > 0.0).map(|&(t, r)| (t, r.ln())).collect();
    let (b0, g0) = match ols(&positive) {
        Some(line) => (line.intercept.exp(), (-0.5 * line.slope).max(1e-3 / window.end.max(1e-12))),
        None => (pts[0].1.max(1e-12), 1.0 / window.end.max(1e-12)),
    };
    let residuals = |p: &[f64]| -> Result<Vec<f64>> { Ok(pts.iter().map(|&(t, r)| p[0] * (-2.0 * p[1] * t).exp() - r).collect()) };
    run_lm(names(&["b", "gamma_eit"]), residuals, &[b0, g0], &[b0.abs(), g0.abs()], pts.len(), &LmOptions::default())
}

struct Line {
    slope: f64,
    intercept: f64,
    slope_var: f64,
    intercept_var: f64,
    rss: f64,
}

fn ols(points: &[(f64, f64)]) -> Option<Line> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) || sxx <= 1e-24 * points.iter().map(|p| p.0 * p.0).sum::<f64>() {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let s2 = if n > 2 { rss / (nf - 2.0) } else { 0.0 };
    Some(Line { slope, intercept, slope_var: s2 / sxx, intercept_var: s2 * (1.0 / nf + mx * mx / sxx), rss })
}

/// Straight-line fit of γ_EIT against Ω_c² with the implied α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    /// 1/(rad/s)
    pub slope: f64,
    pub slope_sigma: f64,
    /// rad/s
    pub offset: f64,
    pub offset_sigma: f64,
    pub alpha: f64,
    pub alpha_sigma: f64,
    pub rss: f64,
    pub points: usize,
}

impl ScalingFit {
    /// Slope with γ_EIT/2π in MHz against (Ω_c/2π)² in MHz², i.e. per 2π·MHz.
    pub fn slope_per_mhz(&self) -> f64 {
        self.slope * std::f64::consts::TAU * 1e6
    }
}

/// Ordinary least squares of γ_EIT on Ω_c² (`points` as (Ω_c², γ_EIT) in
/// rad²/s² and rad/s), with α = 1/(2·slope·γ·(1+2C)).
pub fn fit_scaling(points: &[(f64, f64)], gamma: f64, cooperativity: f64) -> Result<ScalingFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: points.len() });
    }
    require_positive("gamma", gamma)?;
    let line = ols(points).ok_or_else(|| Error::DegenerateFit("all Ω_c² abscissae coincide".into()))?;
    if !(line.slope > 0.0) {
        return Err(Error::DegenerateFit(format!("slope {:e} is not positive, so α is undefined", line.slope)));
    }
    let k = 2.0 * gamma * (1.0 + 2.0 * cooperativity);
    let alpha = 1.0 / (line.slope * k);
    Ok(ScalingFit {
        slope: line.slope,
        slope_sigma: line.slope_var.sqrt(),
        offset: line.intercept,
        offset_sigma: line.intercept_var.sqrt(),
        alpha,
        alpha_sigma: alpha * line.slope_var.sqrt() / line.slope,
        rss: line.rss,
        points: points.len(),
    })
}

/// Settings shared by the per-crystal analyses of [`n_scan_report`].
#[derive(Debug, Clone)]
pub struct NScanOptions {
    pub shells: ShellDiscretization,
    /// Trace length and sampling for the buildup fit, s.
    pub t_end: f64,
    pub sample_dt: f64,
    /// Synthetic spectrum for the g_N round trip, rad/s.
    pub fit_half_span: f64,
    pub fit_step: f64,
}

impl Default for NScanOptions {
    fn default() -> Self {
        Self {
            shells: dynamics::discretize(dynamics::DEFAULT_SHELLS, 1.0).expect("default shells"),
            t_end: us(4.0),
            sample_dt: us(0.01),
            fit_half_span: crate::units::mhz(25.0),
            fit_step: crate::units::khz(50.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NScanRow {
    pub n_eff: f64,
    /// Injected collective coupling, rad/s.
    pub g_n: f64,
    /// Dip HWHM, rad/s.
    pub hwhm: f64,
    /// Fitted buildup rate γ_EIT, rad/s.
    pub buildup_rate: f64,
    /// Collective coupling recovered from a noiseless synthetic spectrum.
    pub g_n_fit: f64,
    pub g_n_fit_sigma: f64,
}

/// Dip width, buildup rate and round-trip g_N for each crystal at control
/// Rabi frequency `omega_c`.
pub fn n_scan_report(crystals: &[SystemParams], omega_c: f64, opts: &NScanOptions, exec: Execution) -> Result<Vec<NScanRow>> {
    require_positive("omega_c", omega_c)?;
    if let Some(first) = crystals.first() {
        let shared = |p: &SystemParams| (p.kappa(), p.gamma(), p.gamma0());
        if crystals.iter().any(|c| shared(c) != shared(first)) {
            return Err(invalid("crystals", "all crystals must share κ, γ and γ₀"));
        }
    }
    exec.try_map(crystals, |crystal| {
        let params = crystal.with_omega_c(omega_c)?;
        let dip = spectrum::transparency_dip(&params, &SusceptibilityModel::Continuous)?;
        let trace = dynamics::step_response(&params, &opts.shells, opts.t_end, opts.sample_dt)?;
        let window = BuildupWindow::for_model(&params, &opts.shells, &trace)?;
        let buildup = fit_exponential_buildup(&trace, window)?;
        let synthetic = spectrum::scan_spectrum(
            &params,
            (-opts.fit_half_span, opts.fit_half_span),
            opts.fit_step,
            &SusceptibilityModel::Continuous,
            Execution::Sequential,
        )?;
        let spec = GlobalFitSpec {
            base: params,
            model: SusceptibilityModel::Continuous,
            observable: Observable::Reflectivity,
            g_n_guess: 1.1 * params.g_n(),
            control: vec![ControlRabi::Free(0.9 * omega_c)],
            options: LmOptions::default(),
        };
        let g_fit = fit_spectrum_global(std::slice::from_ref(&synthetic), &spec)?;
        Ok(NScanRow {
            n_eff: params.ensemble.n_eff,
            g_n: params.g_n(),
            hwhm: dip.hwhm,
            buildup_rate: buildup.value("gamma_eit"),
            g_n_fit: g_fit.value("g_n"),
            g_n_fit_sigma: g_fit.sigma("g_n"),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TraceRow;
    use crate::spectrum::SpectrumRow;
    use crate::susceptibility::Variant;
    use crate::units::{khz, mhz};

    fn lorentz_table(hwhm: f64, depth: f64) -> SpectrumTable {
        let rows = (-200..=200)
            .map(|i| {
                let delta = khz(50.0) * f64::from(i);
                SpectrumRow { delta, reflectivity: lorentzian_dip(delta, 0.0, hwhm, depth, 1.0), transmittivity: 0.0, photon_number: 0.0 }
            })
            .collect();
        SpectrumTable { rows, variant: Variant::Canonical }
    }

    #[test]
    fn lorentzian_self_fit() {
        let fit = fit_lorentzian(&lorentz_table(mhz(2.2), 0.8)).unwrap();
        assert!((fit.value("hwhm") / mhz(2.2) - 1.0).abs() < 1e-6);
        assert!(fit.value("center").abs() < 1.0);
        assert!(fit.converged);
    }

    #[test]
    fn lorentzian_needs_five_points() {
        let mut t = lorentz_table(mhz(1.0), 0.5);
        t.rows.truncate(4);
        assert_eq!(fit_lorentzian(&t).unwrap_err(), Error::InsufficientData { needed: 5, got: 4 });
    }

    #[test]
    fn exponential_recovered_exactly() {
        let rows = (0..200)
            .map(|i| {
                let t = us(0.01) * f64::from(i);
                TraceRow { t, reflectivity: 0.3 * (-2.0 * khz(20.0) * t).exp(), photon_number: 0.0 }
            })
            .collect::<Vec<_>>();
        let trace = DynamicsTrace { amplitudes: vec![Complex64::new(0.0, 0.0); rows.len()], rows, snapshots: Vec::new() };
        let fit = fit_exponential_buildup(&trace, BuildupWindow { start: 0.0, end: us(2.0) }).unwrap();
        assert!((fit.value("gamma_eit") / khz(20.0) - 1.0).abs() < 1e-9);
        assert!((fit.value("b") - 0.3).abs() < 1e-9);
        let short = fit_exponential_buildup(&trace, BuildupWindow { start: 0.0, end: us(0.03) });
        assert_eq!(short.unwrap_err(), Error::InsufficientData { needed: 5, got: 4 });
    }

    #[test]
    fn scaling_through_two_points_is_exact() {
        let s = fit_scaling(&[(1.0, 3.0), (3.0, 7.0)], 1.0, 0.0).unwrap();
        assert_eq!((s.slope, s.offset), (2.0, 1.0));
        assert_eq!(s.alpha, 0.25);
        assert!(matches!(fit_scaling(&[(1.0, 3.0), (1.0, 7.0), (1.0, 1.0)], 1.0, 0.0), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_scaling(&[(1.0, 3.0)], 1.0, 0.0), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn alpha_is_one_for_the_corrected_linewidth() {
        let (gamma, c, g0) = (mhz(12.6), 5.4, khz(1.0));
        let pts: Vec<(f64, f64)> = [1.0, 3.0, 5.0]
            .iter()
            .map(|&o| {
                let w2 = mhz(o).powi(2);
                (w2, g0 + w2 / (2.0 * gamma * (1.0 + 2.0 * c)))
            })
            .collect();
        let s = fit_scaling(&pts, gamma, c).unwrap();
        assert!((s.alpha - 1.0).abs() < 1e-12);
        assert!((s.offset / g0 - 1.0).abs() < 1e-6);
    }
}
