//! The non-preset modes. Each runner stages its files in [`Outputs`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use eitlab_core::dynamics::{self, DynamicsOptions, DynamicsTrace, ShellDiscretization};
use eitlab_core::fit::{
    self, fit_exponential_buildup, fit_lorentzian_with, fit_scaling, fit_spectrum_global, BuildupWindow, ControlRabi, FitResult,
    GlobalFitSpec, NScanOptions, Observable, FIT_CSV_HEADER, N_SCAN_CSV_HEADER, SCALING_CSV_HEADER,
};
use eitlab_core::params::{EnsembleParams, ResolvedParams, SystemParams};
use eitlab_core::spectrum::{self, atomic_transparency, scan_spectrum, transparency_dip, SpectrumTable};
use eitlab_core::susceptibility::{DiscreteEnsemble, SusceptibilityModel};
use eitlab_core::units::{mhz, to_khz, to_mhz, to_us, um, us};
use eitlab_core::Execution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{
    spectrum_grid, DynamicsBlock, FitBlock, FitKind, Measure, ModelKind, ObservableKind, ScanNBlock, ScanOmegaBlock, ScenarioConfig,
    ShellsBlock, SpectrumBlock, TraceBlock, TraceKind,
};
use crate::csvio;
use crate::error::{CliError, Context};
use crate::output::{sci, Outputs};
use crate::svg::{line_plot, Series};

/// Probe waist used for sampled ensembles when no geometry is given, µm.
const DEFAULT_WAIST_UM: f64 = 37.0;

/// Everything a mode needs besides its own block.
pub struct RunContext<'a> {
    pub cfg: &'a ScenarioConfig,
    pub resolved: ResolvedParams,
    pub seed: Option<u64>,
    pub exec: Execution,
    /// Directory that relative data paths are resolved against.
    pub base_dir: PathBuf,
    pub svg: bool,
}

impl RunContext<'_> {
    pub fn params(&self) -> &SystemParams {
        &self.resolved.params
    }

    fn require_seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::schema(format!("field `seed`: required because {what} uses random sampling")))
    }

    fn model(&self, kind: ModelKind, discrete: Option<&crate::config::DiscreteBlock>, shells: Option<&ShellsBlock>) -> Result<SusceptibilityModel, CliError> {
        let p = self.params();
        Ok(match kind {
            ModelKind::Continuous => SusceptibilityModel::Continuous,
            ModelKind::Canonical => SusceptibilityModel::Canonical,
            ModelKind::Quadrature => SusceptibilityModel::Quadrature,
            ModelKind::Shells => SusceptibilityModel::Shells(shells.cloned().unwrap_or_default().build(p.beta).context("shells")?),
            ModelKind::Discrete => {
                let block = discrete.ok_or_else(|| CliError::schema("field `discrete`: required for the discrete model"))?;
                let seed = self.require_seed("the discrete model")?;
                let w_p = self.cfg.params.geometry.as_ref().map_or(um(DEFAULT_WAIST_UM), |g| um(g.waist_probe_um));
                let ens = DiscreteEnsemble::uniform_disk(block.ions, um(block.radius_um), w_p, w_p / p.beta.sqrt(), p.g_n(), block.sampling.into(), seed)
                    .context("discrete ensemble")?;
                SusceptibilityModel::Discrete(Arc::new(ens))
            }
        })
    }
}

fn trace_options(block: &TraceBlock, snapshot_every: Option<usize>) -> DynamicsOptions {
    DynamicsOptions { method: block.method(), snapshot_every }
}

fn spectrum_svg(title: &str, tables: &[(&str, &SpectrumTable)]) -> String {
    let series: Vec<(String, Vec<(f64, f64)>)> = tables
        .iter()
        .map(|(label, t)| (label.to_string(), t.rows.iter().map(|r| (to_mhz(r.delta), r.reflectivity)).collect()))
        .collect();
    let refs: Vec<Series> = series.iter().map(|(l, p)| Series { label: l, points: p }).collect();
    line_plot(title, "detuning / 2pi (MHz)", "reflectivity", &refs)
}

fn trace_svg(title: &str, traces: &[(String, &DynamicsTrace)]) -> String {
    let series: Vec<(String, Vec<(f64, f64)>)> =
        traces.iter().map(|(l, t)| (l.clone(), t.rows.iter().map(|r| (to_us(r.t), r.reflectivity)).collect())).collect();
    let refs: Vec<Series> = series.iter().map(|(l, p)| Series { label: l, points: p }).collect();
    line_plot(title, "time (us)", "reflectivity", &refs)
}

fn fit_csv(fits: &[(String, FitResult)]) -> String {
    let mut out = format!("{FIT_CSV_HEADER}\n");
    for (label, f) in fits {
        out.push_str(&f.to_csv_rows(label));
    }
    out
}

pub fn run_spectrum(ctx: &RunContext, block: &SpectrumBlock, out: &mut Outputs) -> Result<(), CliError> {
    let p = ctx.params();
    let (lo, hi, step) = spectrum_grid(block);
    let model = ctx.model(block.model, block.discrete.as_ref(), block.shells.as_ref())?;
    let table = scan_spectrum(p, (lo, hi), step, &model, ctx.exec).context("spectrum")?;
    let minima = table.reflectivity_minima();
    let listed: Vec<String> = minima.iter().map(|(d, r)| format!("{:.4} MHz (R = {r:.4})", to_mhz(*d))).collect();
    out.notes.push(format!("reflectivity minima: {}", if listed.is_empty() { "none".into() } else { listed.join(", ") }));
    out.add("spectrum.csv", table.to_csv());
    if block.dip {
        let dip = transparency_dip(p, &model).context("transparency dip")?;
        let transparency = atomic_transparency(p, &model).context("atomic transparency")?;
        let mut text = String::new();
        let _ = writeln!(text, "center_khz = {}", sci(to_khz(dip.center)));
        let _ = writeln!(text, "hwhm_khz = {}", sci(to_khz(dip.hwhm)));
        let _ = writeln!(text, "depth = {}", sci(dip.depth));
        let _ = writeln!(text, "baseline = {}", sci(dip.baseline));
        let _ = writeln!(text, "atomic_transparency = {}", sci(transparency));
        out.notes.push(format!("dip HWHM {:.3} kHz, atomic transparency {:.2}%", to_khz(dip.hwhm), 100.0 * transparency));
        out.add("dip.txt", text);
    }
    if block.fit_lorentzian {
        let fit = fit_lorentzian_with(&table, &fit::LmOptions::default()).context("Lorentzian fit")?;
        out.add("lorentzian_fit.csv", fit_csv(&[("spectrum".into(), fit)]));
    }
    if ctx.svg {
        out.add("spectrum.svg", spectrum_svg("Probe reflectivity", &[("R", &table)]));
    }
    Ok(())
}

fn shells_csv(trace: &DynamicsTrace, shells: &ShellDiscretization) -> String {
    let mut out = String::from("t_us,shell,u,weight,sigma_re,sigma_im,ground_re,ground_im\n");
    for snap in &trace.snapshots {
        for (k, shell) in shells.shells().iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{k},{},{},{},{},{},{}",
                sci(to_us(snap.t)),
                sci(shell.u),
                sci(shell.weight),
                sci(snap.sigma[k].re),
                sci(snap.sigma[k].im),
                sci(snap.ground[k].re),
                sci(snap.ground[k].im)
            );
        }
    }
    out
}

pub fn run_dynamics(ctx: &RunContext, block: &DynamicsBlock, out: &mut Outputs) -> Result<(), CliError> {
    let p = ctx.params();
    let shells = block.trace.shells.build(p.beta).context("shells")?;
    let opts = trace_options(&block.trace, block.snapshot_every);
    let trace = match block.kind {
        TraceKind::Step => {
            if block.t_off_us.is_some() {
                return Err(CliError::schema("field `dynamics.t_off_us`: only valid for `switch_off` traces"));
            }
            dynamics::step_response_with(p, &shells, block.trace.t_end(), block.trace.sample_dt(), &opts).context("step response")?
        }
        TraceKind::SwitchOff => {
            let t_off = block.t_off_us.ok_or_else(|| CliError::schema("field `dynamics.t_off_us`: required for `switch_off` traces"))?;
            dynamics::switchoff_response_with(p, &shells, us(t_off), block.trace.t_end(), block.trace.sample_dt(), &opts)
                .context("switch-off response")?
        }
    };
    if block.fit_buildup {
        let window = BuildupWindow::for_model(p, &shells, &trace).context("buildup window")?;
        let fit = fit_exponential_buildup(&trace, window).context("buildup fit")?;
        out.notes.push(format!(
            "buildup rate {:.3} kHz over {:.3}-{:.3} us",
            to_khz(fit.value("gamma_eit")),
            to_us(window.start),
            to_us(window.end)
        ));
        out.add("buildup_fit.csv", fit_csv(&[("trace".into(), fit)]));
    }
    if !trace.snapshots.is_empty() {
        out.add("shells.csv", shells_csv(&trace, &shells));
    }
    let written = match block.boxcar_us {
        Some(w) => trace.boxcar(us(w)).context("boxcar")?,
        None => trace,
    };
    if let Some(last) = written.last() {
        out.notes.push(format!("final reflectivity {:.6} at {:.3} us", last.reflectivity, to_us(last.t)));
    }
    out.add("trace.csv", written.to_csv());
    if ctx.svg {
        out.add("trace.svg", trace_svg("Probe reflectivity dynamics", &[("R".into(), &written)]));
    }
    Ok(())
}

/// Buildup rate for one parameter set with the standard window.
pub fn buildup_rate(p: &SystemParams, shells: &ShellDiscretization, block: &TraceBlock) -> eitlab_core::Result<(f64, DynamicsTrace)> {
    let trace = dynamics::step_response_with(p, shells, block.t_end(), block.sample_dt(), &trace_options(block, None))?;
    let window = BuildupWindow::for_model(p, shells, &trace)?;
    Ok((fit_exponential_buildup(&trace, window)?.value("gamma_eit"), trace))
}

pub fn run_scan_omega(ctx: &RunContext, block: &ScanOmegaBlock, out: &mut Outputs) -> Result<(), CliError> {
    if block.omegas_mhz.is_empty() {
        return Err(CliError::schema("field `scan_omega.omegas_mhz`: at least one control Rabi frequency is required"));
    }
    if let Some(bad) = block.omegas_mhz.iter().find(|o| !(o.is_finite() && **o > 0.0)) {
        return Err(CliError::schema(format!("field `scan_omega.omegas_mhz`: values must be > 0, got {bad}")));
    }
    let p = ctx.params();
    let model = ctx.model(block.model, None, Some(&block.trace.shells))?;
    let shells = block.trace.shells.build(p.beta).context("shells")?;
    let want_hwhm = matches!(block.measure, Measure::Hwhm | Measure::Both);
    let want_rate = matches!(block.measure, Measure::Buildup | Measure::Both);
    let rows = ctx
        .exec
        .try_map(&block.omegas_mhz, |&om| -> eitlab_core::Result<(f64, Option<f64>, Option<f64>)> {
            let q = p.with_omega_c(mhz(om))?;
            let hwhm = if want_hwhm { Some(transparency_dip(&q, &model)?.hwhm) } else { None };
            let rate = if want_rate { Some(buildup_rate(&q, &shells, &block.trace)?.0) } else { None };
            Ok((om, hwhm, rate))
        })
        .context("control scan")?;

    let mut header = vec!["omega_c_mhz", "omega_c_sq_mhz2"];
    if want_hwhm {
        header.push("hwhm_khz");
    }
    if want_rate {
        header.push("buildup_rate_khz");
    }
    let mut csv = header.join(",") + "\n";
    for (om, hwhm, rate) in &rows {
        let mut cells = vec![sci(*om), sci(om * om)];
        cells.extend(hwhm.map(|h| sci(to_khz(h))));
        cells.extend(rate.map(|r| sci(to_khz(r))));
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    out.add("scan_omega.csv", csv);

    if rows.len() >= 2 {
        let mut scaling = format!("{SCALING_CSV_HEADER}\n");
        let mut report = String::new();
        for (label, pick) in [("hwhm", 0usize), ("buildup", 1)] {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|(om, h, r)| if pick == 0 { h.map(|v| (mhz(*om).powi(2), v)) } else { r.map(|v| (mhz(*om).powi(2), v)) })
                .collect();
            if points.len() < 2 {
                continue;
            }
            let s = fit_scaling(&points, p.gamma(), p.cooperativity()).context("scaling fit")?;
            out.notes.push(format!(
                "{label}: slope {:.4e} per 2pi MHz, offset {:.3} kHz, alpha {:.3}",
                s.slope_per_mhz(),
                to_khz(s.offset),
                s.alpha
            ));
            scaling.push_str(&s.to_csv_row(label));
            let _ = writeln!(report, "[{label}]\n{}", s.to_report());
        }
        out.add("scaling.csv", scaling);
        out.add("scaling.txt", report);
    }
    if ctx.svg {
        let hw: Vec<(f64, f64)> = rows.iter().filter_map(|(om, h, _)| h.map(|v| (om * om, to_khz(v)))).collect();
        let rt: Vec<(f64, f64)> = rows.iter().filter_map(|(om, _, r)| r.map(|v| (om * om, to_khz(v)))).collect();
        let svg = line_plot(
            "Widths and buildup rates",
            "control Rabi frequency squared (MHz^2)",
            "rate / 2pi (kHz)",
            &[Series { label: "HWHM", points: &hw }, Series { label: "buildup", points: &rt }],
        );
        out.add("scan_omega.svg", svg);
    }
    Ok(())
}

pub fn run_scan_n(ctx: &RunContext, block: &ScanNBlock, out: &mut Outputs) -> Result<(), CliError> {
    if block.n_eff.is_empty() {
        return Err(CliError::schema("field `scan_n.n_eff`: at least one ion number is required"));
    }
    let g = ctx
        .cfg
        .params
        .g_mhz
        .map(mhz)
        .ok_or_else(|| CliError::schema("field `params.g_mhz`: the single-ion coupling is required for an ion-number scan"))?;
    let p = ctx.params();
    let crystals = block
        .n_eff
        .iter()
        .map(|&n| p.with_ensemble(EnsembleParams { g, n_eff: n, ..p.ensemble }))
        .collect::<eitlab_core::Result<Vec<_>>>()
        .context("crystals")?;
    let opts = NScanOptions {
        shells: block.trace.shells.build(p.beta).context("shells")?,
        t_end: block.trace.t_end(),
        sample_dt: block.trace.sample_dt(),
        fit_half_span: mhz(block.fit_half_span_mhz),
        fit_step: mhz(block.fit_step_mhz),
    };
    let rows = fit::n_scan_report(&crystals, mhz(block.omega_c_mhz), &opts, ctx.exec).context("ion-number scan")?;
    let mut csv = format!("{N_SCAN_CSV_HEADER}\n");
    for r in &rows {
        csv.push_str(&r.to_csv_row());
    }
    out.add("n_scan.csv", csv);
    if ctx.svg {
        let hw: Vec<(f64, f64)> = rows.iter().map(|r| (r.n_eff, to_khz(r.hwhm))).collect();
        let rt: Vec<(f64, f64)> = rows.iter().map(|r| (r.n_eff, to_khz(r.buildup_rate))).collect();
        out.add(
            "n_scan.svg",
            line_plot("Ion-number scan", "effective ion number", "rate / 2pi (kHz)", &[
                Series { label: "HWHM", points: &hw },
                Series { label: "buildup", points: &rt },
            ]),
        );
    }
    Ok(())
}

fn resolve_path(base: &Path, name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
}

fn label_of(name: &str) -> String {
    Path::new(name).file_stem().map_or_else(|| name.to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn run_fit(ctx: &RunContext, block: &FitBlock, out: &mut Outputs) -> Result<(), CliError> {
    if block.data.is_empty() {
        return Err(CliError::schema("field `fit.data`: at least one data file is required"));
    }
    let mut noise = match block.noise_rel {
        Some(sigma) => {
            let seed = ctx.require_seed("`fit.noise_rel`")?;
            let normal = Normal::new(0.0, sigma).map_err(|e| CliError::schema(format!("field `fit.noise_rel`: {e}")))?;
            Some((ChaCha8Rng::seed_from_u64(seed), normal))
        }
        None => None,
    };
    let mut jitter = |x: f64| match noise.as_mut() {
        Some((rng, normal)) => x * (1.0 + normal.sample(rng)),
        None => x,
    };
    let p = ctx.params();
    let opts = block.lm.options();
    let fits: Vec<(String, FitResult)> = match block.kind {
        FitKind::Lorentzian => {
            let mut fits = Vec::new();
            for name in &block.data {
                let mut table = csvio::read_spectrum(&resolve_path(&ctx.base_dir, name))?;
                table.rows.iter_mut().for_each(|r| r.reflectivity = jitter(r.reflectivity));
                fits.push((label_of(name), fit_lorentzian_with(&table, &opts).context("Lorentzian fit")?));
            }
            fits
        }
        FitKind::Global => {
            let g_guess = block.g_n_guess_mhz.ok_or_else(|| CliError::schema("field `fit.g_n_guess_mhz`: required for a global fit"))?;
            if block.omega_c_mhz.len() != block.data.len() {
                return Err(CliError::schema(format!(
                    "field `fit.omega_c_mhz`: {} values given for {} datasets",
                    block.omega_c_mhz.len(),
                    block.data.len()
                )));
            }
            let mut datasets = Vec::new();
            for name in &block.data {
                let mut table = csvio::read_spectrum(&resolve_path(&ctx.base_dir, name))?;
                for r in table.rows.iter_mut() {
                    r.reflectivity = jitter(r.reflectivity);
                    r.transmittivity = jitter(r.transmittivity);
                }
                datasets.push(table);
            }
            let control = block
                .omega_c_mhz
                .iter()
                .map(|&o| if block.fix_control { ControlRabi::Fixed(mhz(o)) } else { ControlRabi::Free(mhz(o)) })
                .collect();
            let spec = GlobalFitSpec {
                base: *p,
                model: ctx.model(block.model, None, None)?,
                observable: match block.observable {
                    ObservableKind::Reflectivity => Observable::Reflectivity,
                    ObservableKind::Transmittivity => Observable::Transmittivity,
                },
                g_n_guess: mhz(g_guess),
                control,
                options: opts,
            };
            vec![("global".into(), fit_spectrum_global(&datasets, &spec).context("global spectrum fit")?)]
        }
        FitKind::Buildup => {
            let mut fits = Vec::new();
            for name in &block.data {
                let mut trace = csvio::read_trace(&resolve_path(&ctx.base_dir, name))?;
                trace.rows.iter_mut().for_each(|r| r.reflectivity = jitter(r.reflectivity));
                let window = match (block.window_start_us, block.window_end_us) {
                    (Some(a), Some(b)) => BuildupWindow { start: us(a), end: us(b) },
                    (None, None) => {
                        let r_ss = spectrum::response(p, &SusceptibilityModel::Continuous, 0.0).context("steady state")?.reflectivity;
                        BuildupWindow::standard(p.kappa(), &trace, r_ss).context("buildup window")?
                    }
                    _ => return Err(CliError::schema("fields `fit.window_start_us`/`fit.window_end_us`: give both or neither")),
                };
                fits.push((label_of(name), fit_exponential_buildup(&trace, window).context("buildup fit")?));
            }
            fits
        }
    };
    let mut report = String::new();
    for (label, f) in &fits {
        let _ = writeln!(report, "[{label}]\n{}", f.to_report());
    }
    out.add("fit.csv", fit_csv(&fits));
    out.add("fit.txt", report);
    Ok(())
}
