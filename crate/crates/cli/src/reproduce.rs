//! Figure presets: fixed parameter sets, computed data, and a summary that
//! compares computed quantities with the published numbers.

use std::fmt::Write as _;

use eitlab_core::dynamics::{self, DynamicsTrace};
use eitlab_core::fit::{
    self, fit_exponential_buildup, fit_scaling, fit_spectrum_global, BuildupWindow, ControlRabi, GlobalFitSpec, LmOptions, NScanOptions,
    Observable, FIT_CSV_HEADER, N_SCAN_CSV_HEADER, SCALING_CSV_HEADER,
};
use eitlab_core::params::SystemParams;
use eitlab_core::presets;
use eitlab_core::spectrum::{atomic_transparency, response, scan_spectrum, transparency_dip, SpectrumTable};
use eitlab_core::susceptibility::SusceptibilityModel;
use eitlab_core::units::{khz, mhz, to_khz, to_mhz, to_us, us};
use eitlab_core::Execution;

use crate::error::{CliError, Context};
use crate::output::{sci, Check, Outputs};
use crate::svg::{line_plot, Series};

pub const FIGURES: [&str; 7] = ["fig3", "fig5", "fig6", "fig8", "fig9", "fig10", "fig11"];

// Comparison bands.
const TRANSPARENCY_OFF_TOL: f64 = 0.01;
const TRANSPARENCY_ON_TOL: f64 = 0.06;
const DIP_REL_TOL: f64 = 0.20;
const ALPHA_TOL: f64 = 0.1;
const SLOPE_TOL: f64 = 0.25e-3;
const OFFSET_TARGET_KHZ: f64 = 1.0;
const OFFSET_TOL_KHZ: f64 = 0.5;
const BUILDUP_SLOPE: f64 = 1.8e-3;
const BUILDUP_SLOPE_TOL: f64 = 0.2e-3;
const BUILDUP_OFFSET_TOL_KHZ: f64 = 0.4;
const G_FIT_TOL_MHZ: f64 = 0.2;
const OMEGA_FIT_TOL_MHZ: [f64; 4] = [0.04, 0.11, 0.18, 0.26];
const SWITCH_OFF_TOL: f64 = 1e-3;
const G_ROUND_TRIP_REL_TOL: f64 = 0.01;
const RATE_WIDTH_REL_TOL: f64 = 0.15;

// Trace settings shared by the buildup presets.
const TRACE_END_US: f64 = 4.0;
const TRACE_DT_US: f64 = 0.01;

pub struct Preset {
    pub exec: Execution,
    pub svg: bool,
}

pub fn run(figure: &str, preset: &Preset, out: &mut Outputs) -> Result<(), CliError> {
    match figure {
        "fig3" => fig3(preset, out),
        "fig5" => fig5(preset, out),
        "fig6" => fig6(preset, out),
        "fig8" => fig8(preset, out),
        "fig9" => fig9(preset, out),
        "fig10" => fig10(preset, out),
        "fig11" => fig11(preset, out),
        other => Err(CliError::schema(format!("field `reproduce.figure`: unknown figure `{other}`; expected one of {}", FIGURES.join(", ")))),
    }
}

fn shells() -> Result<dynamics::ShellDiscretization, CliError> {
    dynamics::discretize(dynamics::DEFAULT_SHELLS, 1.0).context("shells")
}

fn spectra_svg(title: &str, tables: &[(String, &SpectrumTable)]) -> String {
    let series: Vec<(String, Vec<(f64, f64)>)> =
        tables.iter().map(|(l, t)| (l.clone(), t.rows.iter().map(|r| (to_mhz(r.delta), r.reflectivity)).collect())).collect();
    let refs: Vec<Series> = series.iter().map(|(l, p)| Series { label: l, points: p }).collect();
    line_plot(title, "detuning / 2pi (MHz)", "reflectivity", &refs)
}

fn traces_svg(title: &str, traces: &[(String, &DynamicsTrace)]) -> String {
    let series: Vec<(String, Vec<(f64, f64)>)> =
        traces.iter().map(|(l, t)| (l.clone(), t.rows.iter().map(|r| (to_us(r.t), r.reflectivity)).collect())).collect();
    let refs: Vec<Series> = series.iter().map(|(l, p)| Series { label: l, points: p }).collect();
    line_plot(title, "time (us)", "reflectivity", &refs)
}

fn tag(om: f64) -> String {
    format!("{om}").replace('.', "p")
}

/// Transparency spectra of the reference crystal.
fn fig3(preset: &Preset, out: &mut Outputs) -> Result<(), CliError> {
    let model = SusceptibilityModel::Continuous;
    let eit = SystemParams::reference(mhz(presets::SPECTRA_G_N_MHZ), mhz(presets::SPECTRA_OMEGA_MHZ));
    let dark = eit.with_omega_c(0.0).context("params")?;
    let bare = SystemParams::reference(0.0, 0.0);
    let wide = (mhz(-25.0), mhz(25.0));
    let zoom = (mhz(-1.0), mhz(1.0));
    let mut tables = Vec::new();
    for (name, p, range, step) in [
        ("fig3a_bare", &bare, wide, khz(5.0)),
        ("fig3a_no_control", &dark, wide, khz(5.0)),
        ("fig3a_control", &eit, wide, khz(5.0)),
        ("fig3b_no_control", &dark, zoom, khz(0.2)),
        ("fig3b_control", &eit, zoom, khz(0.2)),
    ] {
        let t = scan_spectrum(p, range, step, &model, preset.exec).context("spectrum")?;
        out.add(format!("{name}.csv"), t.to_csv());
        tables.push((name.to_string(), t));
    }
    let t_off = atomic_transparency(&dark, &model).context("transparency")?;
    let t_on = atomic_transparency(&eit, &model).context("transparency")?;
    let hwhm = to_khz(transparency_dip(&eit, &model).context("dip")?.hwhm);
    out.checks.push(Check::within("atomic transparency without control", 100.0 * t_off, 100.0 * presets::TRANSPARENCY_OFF, 100.0 * TRANSPARENCY_OFF_TOL, "%"));
    out.checks.push(Check::within("atomic transparency with control", 100.0 * t_on, 100.0 * presets::TRANSPARENCY_ON, 100.0 * TRANSPARENCY_ON_TOL, "%"));
    out.checks.push(Check::within("dip HWHM", hwhm, presets::DIP_HWHM_KHZ, DIP_REL_TOL * presets::DIP_HWHM_KHZ, "kHz"));
    out.notes.push(format!("transparency {:.1}% -> {:.1}% with control", 100.0 * t_off, 100.0 * t_on));
    if preset.svg {
        let wide: Vec<(String, &SpectrumTable)> = tables[..3].iter().map(|(n, t)| (n.clone(), t)).collect();
        out.add("fig3a.svg", spectra_svg("Reflectivity spectra", &wide));
        let zoom: Vec<(String, &SpectrumTable)> = tables[3..].iter().map(|(n, t)| (n.clone(), t)).collect();
        out.add("fig3b.svg", spectra_svg("Transparency window", &zoom));
    }
    Ok(())
}

/// Power-scan spectra and their global fit.
fn fig5(preset: &Preset, out: &mut Outputs) -> Result<(), CliError> {
    let truth = SystemParams::reference(mhz(presets::POWER_SCAN_G_N_MHZ), 0.0);
    let mut datasets = Vec::new();
    for &om in &presets::POWER_SCAN_OMEGAS_MHZ {
        let p = truth.with_omega_c(mhz(om)).context("params")?;
        let t = scan_spectrum(&p, (mhz(-1.0), mhz(1.0)), khz(2.0), &SusceptibilityModel::Continuous, preset.exec).context("spectrum")?;
        out.add(format!("fig5_omega_{}.csv", tag(om)), t.to_csv());
        datasets.push(t);
    }
    let spec = GlobalFitSpec {
        base: truth,
        model: SusceptibilityModel::Continuous,
        observable: Observable::Reflectivity,
        g_n_guess: mhz(0.85 * presets::POWER_SCAN_G_N_MHZ),
        control: presets::POWER_SCAN_OMEGAS_MHZ.iter().map(|&om| ControlRabi::Free(mhz(0.9 * om))).collect(),
        options: LmOptions::default(),
    };
    let fit = fit_spectrum_global(&datasets, &spec).context("global fit")?;
    out.add("fig5_global_fit.csv", format!("{FIT_CSV_HEADER}\n{}", fit.to_csv_rows("global")));
    out.checks.push(Check::within("fitted g_N", to_mhz(fit.value("g_n")), presets::POWER_SCAN_G_N_MHZ, G_FIT_TOL_MHZ, "MHz"));
    for (k, &om) in presets::POWER_SCAN_OMEGAS_MHZ.iter().enumerate() {
        let value = to_mhz(fit.value(&format!("omega_c_{k}")));
        out.checks.push(Check::within(&format!("fitted control Rabi frequency {k}"), value, om, OMEGA_FIT_TOL_MHZ[k], "MHz"));
    }
    out.notes.push("fits are noiseless round trips on model spectra".into());
    if preset.svg {
        let named: Vec<(String, &SpectrumTable)> =
            presets::POWER_SCAN_OMEGAS_MHZ.iter().zip(&datasets).map(|(om, t)| (format!("{om} MHz"), t)).collect();
        out.add("fig5.svg", spectra_svg("Transparency windows vs control power", &named));
    }
    Ok(())
}

/// Resonant buildup with the control switched off after the interaction.
fn fig6(preset: &Preset, out: &mut Outputs) -> Result<(), CliError> {
    let base = SystemParams::reference(mhz(presets::POWER_SCAN_G_N_MHZ), 0.0);
    let sh = shells()?;
    let t_off = us(10.0);
    let t_end = t_off + 10.0 / base.kappa();
    let dark = response(&base, &SusceptibilityModel::Continuous, 0.0).context("dark level")?.reflectivity;
    let traces = preset
        .exec
        .try_map(&presets::POWER_SCAN_OMEGAS_MHZ, |&om| -> eitlab_core::Result<DynamicsTrace> {
            dynamics::switchoff_response(&base.with_omega_c(mhz(om))?, &sh, t_off, t_end, us(TRACE_DT_US))
        })
        .context("switch-off traces")?;
    let mut worst_return: f64 = 0.0;
    let mut all_fall = true;
    for (&om, trace) in presets::POWER_SCAN_OMEGAS_MHZ.iter().zip(&traces) {
        out.add(format!("fig6_omega_{}.csv", tag(om)), trace.to_csv());
        let before = trace.reflectivity_at(t_off).unwrap_or(f64::NAN);
        all_fall &= before < trace.rows[0].reflectivity;
        worst_return = worst_return.max((trace.last().map_or(f64::NAN, |r| r.reflectivity) - dark).abs());
    }
    out.checks.push(Check::holds("reflectivity falls during the interaction for every control power", all_fall));
    out.checks.push(Check::within("switch-off return to the no-control level, worst |dR|", worst_return, 0.0, SWITCH_OFF_TOL, ""));
    if preset.svg {
        let named: Vec<(String, &DynamicsTrace)> = presets::POWER_SCAN_OMEGAS_MHZ.iter().zip(&traces).map(|(om, t)| (format!("{om} MHz"), t)).collect();
        out.add("fig6.svg", traces_svg("Buildup and switch-off", &named));
    }
    Ok(())
}

struct BuildupRow {
    omega_mhz: f64,
    hwhm: f64,
    rate: f64,
    window: BuildupWindow,
    trace: DynamicsTrace,
}

fn buildup_rows(base: &SystemParams, omegas: &[f64], exec: Execution) -> Result<Vec<BuildupRow>, CliError> {
    let sh = shells()?;
    exec.try_map(omegas, |&om| -> eitlab_core::Result<BuildupRow> {
        let p = base.with_omega_c(mhz(om))?;
        let hwhm = transparency_dip(&p, &SusceptibilityModel::Continuous)?.hwhm;
        let trace = dynamics::step_response(&p, &sh, us(TRACE_END_US), us(TRACE_DT_US))?;
        let window = BuildupWindow::for_model(&p, &sh, &trace)?;
        let rate = fit_exponential_buildup(&trace, window)?.value("gamma_eit");
        Ok(BuildupRow { omega_mhz: om, hwhm, rate, window, trace })
    })
    .context("buildup scan")
}

fn rates_csv(rows: &[BuildupRow]) -> String {
    let mut csv = String::from("omega_c_mhz,omega_c_sq_mhz2,hwhm_khz,buildup_rate_khz,window_start_us,window_end_us\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            sci(r.omega_mhz),
            sci(r.omega_mhz * r.omega_mhz),
            sci(to_khz(r.hwhm)),
            sci(to_khz(r.rate)),
            sci(to_us(r.window.start)),
            sci(to_us(r.window.end))
        );
    }
    csv
}

fn ratio_checks(rows: &[BuildupRow], label: &str, out: &mut Outputs) {
    for r in rows {
        out.checks.push(Check::within(&format!("{label} buildup/HWHM at {} MHz", r.omega_mhz), r.rate / r.hwhm, 1.0, RATE_WIDTH_REL_TOL, ""));
    }
}

/// Simulated buildup at C = 5.4 and the α fit.
fn fig8(preset: &Preset, out: &mut Outputs) -> Result<(), CliError> {
    let base = SystemParams::reference_with_cooperativity(presets::SIM_COOPERATIVITY, 0.0);
    let rows = buildup_rows(&base, &presets::SIM_OMEGAS_MHZ, preset.exec)?;
    for r in &rows {
        out.add(format!("fig8_omega_{}.csv", tag(r.omega_mhz)), r.trace.to_csv());
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (mhz(r.omega_mhz).powi(2), r.rate)).collect();
    let s = fit_scaling(&points, base.gamma(), base.cooperativity()).context("scaling fit")?;
    out.add("fig8_rates.csv", rates_csv(&rows));
    out.add("fig8_scaling.csv", format!("{SCALING_CSV_HEADER}\n{}", s.to_csv_row("buildup")));
    out.checks.push(Check::holds("buildup rates increase with control power", rows.windows(2).all(|w| w[1].rate > w[0].rate)));
    out.checks.push(Check::within("alpha from buildup rates", s.alpha, presets::SIM_ALPHA, ALPHA_TOL, ""));
    ratio_checks(&rows, "C=5.4", out);
    if preset.svg {
        let named: Vec<(String, &DynamicsTrace)> = rows.iter().map(|r| (format!("{} MHz", r.omega_mhz), &r.trace)).collect();
        out.add("fig8.svg", traces_svg("Simulated buildup", &named));
    }
    Ok(())
}

/// Width and buildup-rate scaling with control power.
fn fig9(preset: &Preset, out: &mut Outputs) -> Result<(), CliError> {
    let base = SystemParams::reference(mhz(presets::POWER_SCAN_G_N_MHZ), 0.0);
    let rows = buildup_rows(&base, &presets::WIDTH_SCAN_OMEGAS_MHZ, preset.exec)?;
    let hw: Vec<(f64, f64)> = rows.iter().map(|r| (mhz(r.omega_mhz).powi(2), r.hwhm)).collect();
    let rt: Vec<(f64, f64)> = rows.iter().map(|r| (mhz(r.omega_mhz).powi(2), r.rate)).collect();
    let sh = fit_scaling(&hw, base.gamma(), base.cooperativity()).context("width scaling")?;
    let sr = fit_scaling(&rt, base.gamma(), base.cooperativity()).context("rate scaling")?;
    out.add("fig9_rates.csv", rates_csv(&rows));
    out.add("fig9_scaling.csv", format!("{SCALING_CSV_HEADER}\n{}{}", sh.to_csv_row("hwhm"), sr.to_csv_row("buildup")));
    out.checks.push(Check::within("HWHM slope", sh.slope_per_mhz(), presets::WIDTH_SLOPE_PER_MHZ, SLOPE_TOL, "per 2pi MHz"));
    out.checks.push(Check::within("HWHM offset", to_khz(sh.offset), OFFSET_TARGET_KHZ, OFFSET_TOL_KHZ, "kHz"));
    out.checks.push(Check::within("buildup slope", sr.slope_per_mhz(), BUILDUP_SLOPE, BUILDUP_SLOPE_TOL, "per 2pi MHz"));
    out.checks.push(Check::within("buildup offset", to_khz(sr.offset), OFFSET_TARGET_KHZ, BUILDUP_OFFSET_TOL_KHZ, "kHz"));
    ratio_checks(&rows, "gN=16.2", out);
    if preset.svg {
        let a: Vec<(f64, f64)> = rows.iter().map(|r| (r.omega_mhz.powi(2), to_khz(r.hwhm))).collect();
        let b: Vec<(f64, f64)> = rows.iter().map(|r| (r.omega_mhz.powi(2), to_khz(r.rate))).collect();
        out.add(
            "fig9.svg",
            line_plot("Widths and buildup rates", "control Rabi frequency squared (MHz^2)", "rate / 2pi (kHz)", &[
                Series { label: "HWHM", points: &a },
                Series { label: "buildup", points: &b },
            ]),
        );
    }
    Ok(())
}

/// Transparency windows for crystals of increasing size.
fn fig10(preset: &Preset, out: &mut Outputs) -> Result<(), CliError> {
    let mut widths = Vec::new();
    let mut tables = Vec::new();
    for &n in &presets::N_SCAN_IONS {
        let p = presets::crystal(n, mhz(presets::N_SCAN_OMEGA_MHZ));
        let t = scan_spectrum(&p, (mhz(-0.5), mhz(0.5)), khz(1.0), &SusceptibilityModel::Continuous, preset.exec).context("spectrum")?;
        widths.push(transparency_dip(&p, &SusceptibilityModel::Continuous).context("dip")?.hwhm);
        out.add(format!("fig10_n{n}.csv"), t.to_csv());
        tables.push((format!("N = {n}"), t));
    }
    out.checks.push(Check::holds("dip narrows strictly with ion number", widths.windows(2).all(|w| w[1] < w[0])));
    let listed: Vec<String> = widths.iter().map(|w| format!("{:.2}", to_khz(*w))).collect();
    out.notes.push(format!("HWHM [{}] kHz", listed.join(", ")));
    if preset.svg {
        let named: Vec<(String, &SpectrumTable)> = tables.iter().map(|(l, t)| (l.clone(), t)).collect();
        out.add("fig10.svg", spectra_svg("Transparency windows vs ion number", &named));
    }
    Ok(())
}

/// Widths, buildup rates and fitted couplings against ion number.
fn fig11(preset: &Preset, out: &mut Outputs) -> Result<(), CliError> {
    let crystals: Vec<SystemParams> = presets::N_SCAN_IONS.iter().map(|&n| presets::crystal(n, 0.0)).collect();
    let rows = fit::n_scan_report(&crystals, mhz(presets::N_SCAN_OMEGA_MHZ), &NScanOptions::default(), preset.exec).context("ion-number scan")?;
    let mut csv = format!("{N_SCAN_CSV_HEADER}\n");
    for r in &rows {
        csv.push_str(&r.to_csv_row());
        out.checks.push(Check::within(&format!("fitted/injected g_N at N = {}", r.n_eff), r.g_n_fit / r.g_n, 1.0, G_ROUND_TRIP_REL_TOL, ""));
    }
    out.add("fig11_n_scan.csv", csv);
    out.checks.push(Check::holds("HWHM decreases strictly with ion number", rows.windows(2).all(|w| w[1].hwhm < w[0].hwhm)));
    for r in &rows {
        out.checks.push(Check::within(&format!("buildup/HWHM at N = {}", r.n_eff), r.buildup_rate / r.hwhm, 1.0, RATE_WIDTH_REL_TOL, ""));
    }
    if preset.svg {
        let a: Vec<(f64, f64)> = rows.iter().map(|r| (r.n_eff, to_khz(r.hwhm))).collect();
        let b: Vec<(f64, f64)> = rows.iter().map(|r| (r.n_eff, to_khz(r.buildup_rate))).collect();
        out.add(
            "fig11.svg",
            line_plot("Widths and buildup rates vs ion number", "effective ion number", "rate / 2pi (kHz)", &[
                Series { label: "HWHM", points: &a },
                Series { label: "buildup", points: &b },
            ]),
        );
    }
    Ok(())
}
