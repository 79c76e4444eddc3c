//! Transient buildup of cavity EIT: the ensemble is cut into radial shells,
//! each carrying one optical coherence σ_k and one ground-state coherence
//! s_k, all coupled to the single cavity probe mode. The probe is switched
//! on at t = 0 with the control field already at steady state.

mod propagator;
mod rk;
mod shells;
mod system;

use std::fmt::Write as _;

use num_complex::Complex64;

pub use propagator::{expm, propagate_exact, EigenBasis, Evolution, PropagationRoute};
pub use rk::AdaptiveOptions;
pub use shells::{discretize, discretize_on, Shell, ShellDiscretization, ShellGrid, DEFAULT_LOG_SCALE};
pub use system::{CMatrix, CVector, LinearSystem};

use crate::error::{invalid, require_positive, Error, Result};
use crate::params::SystemParams;
use crate::units::to_us;

/// Default number of shells.
pub const DEFAULT_SHELLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Exact(PropagationRoute),
    Adaptive(AdaptiveOptions),
}

impl Default for Method {
    fn default() -> Self {
        Method::Exact(PropagationRoute::Eigen)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DynamicsOptions {
    pub method: Method,
    /// Keep per-shell (σ_k, s_k) every this many samples.
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Time since probe turn-on, s.
    pub t: f64,
    pub reflectivity: f64,
    /// Intracavity probe photon number |a|².
    pub photon_number: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShellSnapshot {
    pub t: f64,
    pub sigma: Vec<Complex64>,
    pub ground: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTrace {
    pub rows: Vec<TraceRow>,
    /// Cavity amplitude a(t), one per row.
    pub amplitudes: Vec<Complex64>,
    pub snapshots: Vec<ShellSnapshot>,
}

pub const TRACE_CSV_HEADER: &str = "t_us,reflectivity,photon_number";

impl DynamicsTrace {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn reflectivities(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.reflectivity).collect()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Value of R at the row closest to `t`.
    pub fn reflectivity_at(&self, t: f64) -> Option<f64> {
        self.rows
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .map(|r| r.reflectivity)
    }

    /// Detector-window emulation: each row becomes the mean over
    /// `[t, t + window]`; rows without a full window are dropped.
    pub fn boxcar(&self, window: f64) -> Result<DynamicsTrace> {
        require_positive("window", window)?;
        let n = self.rows.len();
        let mut rows = Vec::new();
        let mut amplitudes = Vec::new();
        let mut end = 0;
        let (mut sum_r, mut sum_n, mut sum_a) = (0.0, 0.0, Complex64::new(0.0, 0.0));
        for start in 0..n {
            let t0 = self.rows[start].t;
            while end < n && self.rows[end].t <= t0 + window * (1.0 + 1e-12) {
                sum_r += self.rows[end].reflectivity;
                sum_n += self.rows[end].photon_number;
                sum_a += self.amplitudes[end];
                end += 1;
            }
            if end == n && self.rows[n - 1].t < t0 + window * (1.0 - 1e-12) {
                break;
            }
            let count = (end - start) as f64;
            rows.push(TraceRow { t: t0, reflectivity: sum_r / count, photon_number: sum_n / count });
            amplitudes.push(sum_a / count);
            sum_r -= self.rows[start].reflectivity;
            sum_n -= self.rows[start].photon_number;
            sum_a -= self.amplitudes[start];
        }
        Ok(DynamicsTrace { rows, amplitudes, snapshots: Vec::new() })
    }

    /// CSV with header `t_us,reflectivity,photon_number`, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.rows.len() + 1));
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{:.11e},{:.11e},{:.11e}", to_us(r.t), r.reflectivity, r.photon_number);
        }
        out
    }
}

/// Uniform sample grid 0, dt, 2dt, …, t_end.
pub fn sample_times(t_end: f64, sample_dt: f64) -> Result<Vec<f64>> {
    require_positive("sample_dt", sample_dt)?;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(invalid("t_end", format!("must be finite and >= 0, got {t_end}")));
    }
    let n = (t_end / sample_dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * sample_dt).collect();
    if t_end - times[n] > 1e-9 * sample_dt {
        times.push(t_end);
    }
    Ok(times)
}

fn input_amplitude(params: &SystemParams) -> Result<Complex64> {
    let a_in = params.drive.input_amplitude();
    if a_in == 0.0 {
        return Err(Error::ZeroInput);
    }
    Ok(Complex64::new(a_in, 0.0))
}

/// R = |√(2κ_H)·a/a_in − 1|².
pub fn reflectivity_of(params: &SystemParams, a: Complex64, a_in: Complex64) -> f64 {
    ((2.0 * params.cavity.kappa_h).sqrt() * a / a_in - 1.0).norm_sqr()
}

fn evolve(system: &LinearSystem, x0: &CVector, times: &[f64], opts: &DynamicsOptions) -> Result<Evolution> {
    let every = opts.snapshot_every;
    let keep = move |i: usize| every.is_some_and(|e| e > 0 && i.is_multiple_of(e));
    match opts.method {
        Method::Exact(route) => propagate_exact(system, x0, times, &keep, route),
        Method::Adaptive(rk_opts) => rk::integrate(system, x0, times, &keep, rk_opts),
    }
}

fn push_rows(trace: &mut DynamicsTrace, params: &SystemParams, a_in: Complex64, times: &[f64], t0: f64, ev: &Evolution, m: usize) {
    for (t, a) in times.iter().zip(&ev.amplitudes) {
        trace.rows.push(TraceRow { t: t0 + t, reflectivity: reflectivity_of(params, *a, a_in), photon_number: a.norm_sqr() });
        trace.amplitudes.push(*a);
    }
    for (i, x) in &ev.snapshots {
        trace.snapshots.push(ShellSnapshot {
            t: t0 + times[*i],
            sigma: x.iter().skip(1).take(m).copied().collect(),
            ground: x.iter().skip(1 + m).take(m).copied().collect(),
        });
    }
}

/// Probe switched on at t = 0 into an empty cavity with ions in |1⟩.
pub fn step_response(params: &SystemParams, shells: &ShellDiscretization, t_end: f64, sample_dt: f64) -> Result<DynamicsTrace> {
    step_response_with(params, shells, t_end, sample_dt, &DynamicsOptions::default())
}

pub fn step_response_with(
    params: &SystemParams,
    shells: &ShellDiscretization,
    t_end: f64,
    sample_dt: f64,
    opts: &DynamicsOptions,
) -> Result<DynamicsTrace> {
    let a_in = input_amplitude(params)?;
    let times = sample_times(t_end, sample_dt)?;
    let system = LinearSystem::new(params, shells, a_in);
    let ev = evolve(&system, &system.zero_state(), &times, opts)?;
    let mut trace = DynamicsTrace { rows: Vec::new(), amplitudes: Vec::new(), snapshots: Vec::new() };
    push_rows(&mut trace, params, a_in, &times, 0.0, &ev, shells.len());
    Ok(trace)
}

/// As [`step_response`], with the control switched off abruptly at `t_off`.
/// The state is continuous across the switch.
pub fn switchoff_response(
    params: &SystemParams,
    shells: &ShellDiscretization,
    t_off: f64,
    t_end: f64,
    sample_dt: f64,
) -> Result<DynamicsTrace> {
    switchoff_response_with(params, shells, t_off, t_end, sample_dt, &DynamicsOptions::default())
}

pub fn switchoff_response_with(
    params: &SystemParams,
    shells: &ShellDiscretization,
    t_off: f64,
    t_end: f64,
    sample_dt: f64,
    opts: &DynamicsOptions,
) -> Result<DynamicsTrace> {
    if !(t_off >= 0.0 && t_off < t_end) {
        return Err(invalid("t_off", format!("switch-off time {t_off} must lie in [0, t_end = {t_end})")));
    }
    let a_in = input_amplitude(params)?;
    let times = sample_times(t_end, sample_dt)?;
    let split = times.partition_point(|&t| t <= t_off);
    let mut trace = DynamicsTrace { rows: Vec::new(), amplitudes: Vec::new(), snapshots: Vec::new() };

    let on = LinearSystem::new(params, shells, a_in);
    let mut before: Vec<f64> = times[..split].to_vec();
    let exact_switch = before.last().is_some_and(|&t| t == t_off);
    if !exact_switch {
        before.push(t_off);
    }
    let ev_on = evolve(&on, &on.zero_state(), &before, opts)?;
    let keep = if exact_switch { before.len() } else { before.len() - 1 };
    let trimmed = Evolution {
        amplitudes: ev_on.amplitudes[..keep].to_vec(),
        snapshots: ev_on.snapshots.iter().filter(|(i, _)| *i < keep).cloned().collect(),
        final_state: ev_on.final_state.clone(),
    };
    push_rows(&mut trace, params, a_in, &before[..keep], 0.0, &trimmed, shells.len());

    let dark = params.with_omega_c(0.0)?;
    let off = LinearSystem::new(&dark, shells, a_in);
    let after: Vec<f64> = times[split..].iter().map(|t| t - t_off).collect();
    let ev_off = evolve(&off, &ev_on.final_state, &after, opts)?;
    push_rows(&mut trace, params, a_in, &after, t_off, &ev_off, shells.len());
    Ok(trace)
}

/// Steady state of the shell model, for comparison with trace end points.
pub fn steady_state(params: &SystemParams, shells: &ShellDiscretization) -> Result<CVector> {
    let a_in = input_amplitude(params)?;
    LinearSystem::new(params, shells, a_in).steady_state()
}
