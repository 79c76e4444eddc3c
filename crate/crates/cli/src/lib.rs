//! Config-driven scenario runner for the eitlab models.

pub mod config;
pub mod csvio;
pub mod error;
pub mod modes;
pub mod output;
pub mod reproduce;
pub mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

use eitlab_core::params::ResolvedParams;
use eitlab_core::presets;
use eitlab_core::units::{to_mhz, to_us};
use eitlab_core::Execution;
use serde::Serialize;

pub use config::{Mode, ScenarioConfig};
pub use error::CliError;
use error::Context;
use output::{Check, Outputs};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const SUMMARY_NAME: &str = "summary.txt";

/// Command-line values that take precedence over the config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub svg: bool,
}

/// Resolved physical parameters in interface units.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSummary {
    pub kappa_mhz: f64,
    pub kappa_h_mhz: f64,
    pub kappa_l_mhz: f64,
    pub gamma_mhz: f64,
    pub gamma0_mhz: f64,
    pub g_mhz: f64,
    pub n_eff: f64,
    pub g_n_mhz: f64,
    pub cooperativity: f64,
    pub omega_c_mhz: f64,
    pub delta_mhz: f64,
    pub input_flux_per_us: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finesse: Option<f64>,
}

impl From<&ResolvedParams> for ResolvedSummary {
    fn from(r: &ResolvedParams) -> Self {
        let p = &r.params;
        Self {
            kappa_mhz: to_mhz(p.cavity.kappa),
            kappa_h_mhz: to_mhz(p.cavity.kappa_h),
            kappa_l_mhz: to_mhz(p.cavity.kappa_l),
            gamma_mhz: to_mhz(p.gamma()),
            gamma0_mhz: to_mhz(p.gamma0()),
            g_mhz: to_mhz(p.ensemble.g),
            n_eff: p.ensemble.n_eff,
            g_n_mhz: to_mhz(p.g_n()),
            cooperativity: p.cooperativity(),
            omega_c_mhz: to_mhz(p.omega_c()),
            delta_mhz: to_mhz(p.delta()),
            input_flux_per_us: p.drive.input_flux * to_us(1.0),
            beta: p.beta,
            finesse: r.finesse,
        }
    }
}

/// Record of one run. Re-running the embedded config reproduces every
/// listed output byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: Mode,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub config: ScenarioConfig,
    pub resolved_params: ResolvedSummary,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Reads `EITLAB_WORKERS`: unset means the rayon default.
pub fn workers_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("EITLAB_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::schema(format!("EITLAB_WORKERS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

/// Loads the config at `config_path` and runs `mode`. Nothing is written
/// unless every computation succeeds.
pub fn run(mode: Mode, config_path: &Path, overrides: &Overrides, workers: Option<usize>) -> Result<RunManifest, CliError> {
    let mut cfg = config::load(config_path)?;
    if overrides.seed.is_some() {
        cfg.seed = overrides.seed;
    }
    if let Some(dir) = &overrides.out_dir {
        // a command-line directory is relative to the working directory
        let dir = std::env::current_dir().map(|cwd| cwd.join(dir)).unwrap_or_else(|_| dir.clone());
        cfg.output.dir = dir.to_string_lossy().into_owned();
    }
    cfg.output.svg |= overrides.svg;
    cfg.mode = Some(mode);
    let base_dir = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    run_config(&cfg, &base_dir, workers)
}

/// Runs an already parsed config; relative paths resolve against `base_dir`.
pub fn run_config(cfg: &ScenarioConfig, base_dir: &Path, workers: Option<usize>) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let mode = cfg.mode.ok_or_else(|| CliError::schema("field `mode`: no mode selected"))?;
    cfg.check_mode(mode)?;
    let resolved = resolve_params(cfg, mode)?;
    let ctx = modes::RunContext {
        cfg,
        resolved,
        seed: cfg.seed,
        exec: Execution::Parallel,
        base_dir: base_dir.to_path_buf(),
        svg: cfg.output.svg,
    };
    let mut out = Outputs::default();
    match mode {
        Mode::Spectrum => modes::run_spectrum(&ctx, cfg.spectrum.as_ref().expect("checked"), &mut out)?,
        Mode::Dynamics => modes::run_dynamics(&ctx, &cfg.dynamics.clone().unwrap_or_else(default_dynamics), &mut out)?,
        Mode::ScanOmega => modes::run_scan_omega(&ctx, cfg.scan_omega.as_ref().expect("checked"), &mut out)?,
        Mode::ScanN => modes::run_scan_n(&ctx, cfg.scan_n.as_ref().expect("checked"), &mut out)?,
        Mode::Fit => modes::run_fit(&ctx, cfg.fit.as_ref().expect("checked"), &mut out)?,
        Mode::Reproduce => {
            let figure = &cfg.reproduce.as_ref().expect("checked").figure;
            let preset = reproduce::Preset { exec: ctx.exec, svg: ctx.svg };
            reproduce::run(figure, &preset, &mut out)?;
        }
    }
    out.add(SUMMARY_NAME, out.summary());

    let dir = resolve_out_dir(base_dir, &cfg.output.dir);
    out.write_all(&dir)?;
    let manifest = RunManifest {
        tool: "eitlab",
        version: env!("CARGO_PKG_VERSION"),
        mode,
        seed: cfg.seed,
        workers,
        config: cfg.clone(),
        resolved_params: ResolvedSummary::from(&ctx.resolved),
        warnings: ctx.resolved.warnings.clone(),
        outputs: out.names(),
        checks: out.checks.clone(),
        notes: out.notes.clone(),
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    let path = dir.join(MANIFEST_NAME);
    std::fs::write(&path, json + "\n").map_err(|e| CliError::schema(format!("cannot write {}: {e}", path.display())))?;
    Ok(manifest)
}

/// Fills an open ensemble: an ion-number scan borrows its first N, and
/// figure reproduction records the spectra crystal as its base point.
fn resolve_params(cfg: &ScenarioConfig, mode: Mode) -> Result<ResolvedParams, CliError> {
    let mut params = cfg.params.clone();
    let open = params.g_n_mhz.is_none() && params.n_eff.is_none() && params.crystal.is_none();
    match (mode, &cfg.scan_n) {
        (Mode::ScanN, Some(scan)) if open => params.n_eff = scan.n_eff.first().copied(),
        (Mode::Reproduce, _) if open => {
            params.g_n_mhz = Some(presets::SPECTRA_G_N_MHZ);
            params.omega_c_mhz = params.omega_c_mhz.or(Some(presets::SPECTRA_OMEGA_MHZ));
        }
        _ => {}
    }
    params.sources().resolve().context("params")
}

fn default_dynamics() -> config::DynamicsBlock {
    config::DynamicsBlock {
        kind: config::TraceKind::Step,
        trace: config::TraceBlock::default(),
        t_off_us: None,
        boxcar_us: None,
        snapshot_every: None,
        fit_buildup: false,
    }
}

/// Relative output directories resolve against the config's directory.
fn resolve_out_dir(base_dir: &Path, dir: &str) -> PathBuf {
    base_dir.join(dir)
}
