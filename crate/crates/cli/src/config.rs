//! Versioned JSON scenario schema. Frequencies are linear MHz, times µs,
//! fluxes photons/µs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use eitlab_core::dynamics::{self, AdaptiveOptions, Method, PropagationRoute, ShellDiscretization, ShellGrid};
use eitlab_core::params::{CavityGeometry, CrystalShape, ParameterSources};
use eitlab_core::susceptibility::DiskSampling;
use eitlab_core::units::{mhz, ppm, um, us};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Spectrum,
    Dynamics,
    ScanOmega,
    ScanN,
    Fit,
    Reproduce,
}

impl Mode {
    pub const ALL: [Mode; 6] = [Mode::Spectrum, Mode::Dynamics, Mode::ScanOmega, Mode::ScanN, Mode::Fit, Mode::Reproduce];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Spectrum => "spectrum",
            Mode::Dynamics => "dynamics",
            Mode::ScanOmega => "scan-omega",
            Mode::ScanN => "scan-n",
            Mode::Fit => "fit",
            Mode::Reproduce => "reproduce",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}`; expected one of spectrum, dynamics, scan-omega, scan-n, fit, reproduce"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    /// Optional; must match the mode given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: ParamsBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_omega: Option<ScanOmegaBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_n: Option<ScanNBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reproduce: Option<ReproduceBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Physical inputs. Direct rates take precedence over apparatus-level ones.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub kappa_mhz: Option<f64>,
    pub kappa_h_mhz: Option<f64>,
    pub kappa_l_mhz: Option<f64>,
    pub geometry: Option<GeometryBlock>,
    pub gamma_mhz: Option<f64>,
    pub gamma0_mhz: Option<f64>,
    pub g_n_mhz: Option<f64>,
    /// Single-ion peak coupling g.
    pub g_mhz: Option<f64>,
    pub n_eff: Option<f64>,
    pub crystal: Option<CrystalBlock>,
    pub omega_c_mhz: Option<f64>,
    /// Single-photon control coupling g_c, used with `control_photons`.
    pub g_c_mhz: Option<f64>,
    pub control_photons: Option<f64>,
    pub delta_mhz: Option<f64>,
    pub input_flux_per_us: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub cavity_length_mm: f64,
    pub waist_probe_um: f64,
    pub waist_control_um: f64,
    pub t_high_ppm: f64,
    pub t_low_ppm: f64,
    pub loss_ppm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalBlock {
    pub density_cm3: f64,
    pub length_um: f64,
}

impl ParamsBlock {
    pub fn sources(&self) -> ParameterSources {
        ParameterSources {
            kappa: self.kappa_mhz.map(mhz),
            kappa_h: self.kappa_h_mhz.map(mhz),
            kappa_l: self.kappa_l_mhz.map(mhz),
            geometry: self.geometry.as_ref().map(|g| CavityGeometry {
                cavity_length: g.cavity_length_mm * 1e-3,
                waist_probe: um(g.waist_probe_um),
                waist_control: um(g.waist_control_um),
                t_high: ppm(g.t_high_ppm),
                t_low: ppm(g.t_low_ppm),
                roundtrip_loss: ppm(g.loss_ppm),
            }),
            gamma: self.gamma_mhz.map(mhz),
            gamma0: self.gamma0_mhz.map(mhz),
            g_n: self.g_n_mhz.map(mhz),
            single_ion_g: self.g_mhz.map(mhz),
            n_eff: self.n_eff,
            crystal: self.crystal.as_ref().map(|c| CrystalShape::from_lab_units(c.density_cm3, c.length_um)),
            omega_c: self.omega_c_mhz.map(mhz),
            control_coupling: self.g_c_mhz.map(mhz),
            control_photons: self.control_photons,
            delta: self.delta_mhz.map(mhz),
            input_flux: self.input_flux_per_us.map(|f| f * 1e6),
            beta: self.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Continuous,
    Canonical,
    Quadrature,
    Discrete,
    Shells,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Stratified,
    Iid,
}

impl From<Sampling> for DiskSampling {
    fn from(s: Sampling) -> Self {
        match s {
            Sampling::Stratified => DiskSampling::Stratified,
            Sampling::Iid => DiskSampling::Iid,
        }
    }
}

/// Sampled ensemble for the discrete model; its seed is the scenario seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteBlock {
    pub ions: usize,
    pub radius_um: f64,
    #[serde(default)]
    pub sampling: Sampling,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    #[serde(default)]
    pub model: ModelKind,
    pub delta_min_mhz: f64,
    pub delta_max_mhz: f64,
    pub step_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shells: Option<ShellsBlock>,
    /// Also measure the transparency dip and atomic transparency.
    #[serde(default)]
    pub dip: bool,
    /// Fit a Lorentzian to the computed spectrum.
    #[serde(default)]
    pub fit_lorentzian: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    #[default]
    LogGauss,
    Uniform,
    Graded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellsBlock {
    #[serde(default = "default_shells")]
    pub count: usize,
    #[serde(default)]
    pub grid: GridKind,
    /// Map scale for `log_gauss`, grading power for `graded`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_parameter: Option<f64>,
}

fn default_shells() -> usize {
    dynamics::DEFAULT_SHELLS
}

impl Default for ShellsBlock {
    fn default() -> Self {
        Self { count: default_shells(), grid: GridKind::LogGauss, grid_parameter: None }
    }
}

impl ShellsBlock {
    pub fn build(&self, beta: f64) -> eitlab_core::Result<ShellDiscretization> {
        let grid = match self.grid {
            GridKind::LogGauss => ShellGrid::LogGauss { scale: self.grid_parameter.unwrap_or(dynamics::DEFAULT_LOG_SCALE) },
            GridKind::Uniform => ShellGrid::Uniform,
            GridKind::Graded => ShellGrid::Graded { power: self.grid_parameter.unwrap_or(2.0) },
        };
        dynamics::discretize_on(self.count, beta, grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    #[default]
    Step,
    SwitchOff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    #[default]
    Eigen,
    Expm,
    Adaptive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceBlock {
    #[serde(default = "default_t_end")]
    pub t_end_us: f64,
    #[serde(default = "default_dt")]
    pub sample_dt_us: f64,
    #[serde(default)]
    pub shells: ShellsBlock,
    #[serde(default)]
    pub method: MethodKind,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
}

fn default_t_end() -> f64 {
    4.0
}

fn default_dt() -> f64 {
    0.01
}

fn default_rel_tol() -> f64 {
    AdaptiveOptions::default().rel_tol
}

fn default_abs_tol() -> f64 {
    AdaptiveOptions::default().abs_tol
}

impl Default for TraceBlock {
    fn default() -> Self {
        Self {
            t_end_us: default_t_end(),
            sample_dt_us: default_dt(),
            shells: ShellsBlock::default(),
            method: MethodKind::Eigen,
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
        }
    }
}

impl TraceBlock {
    pub fn method(&self) -> Method {
        match self.method {
            MethodKind::Eigen => Method::Exact(PropagationRoute::Eigen),
            MethodKind::Expm => Method::Exact(PropagationRoute::Expm),
            MethodKind::Adaptive => Method::Adaptive(AdaptiveOptions {
                rel_tol: self.rel_tol,
                abs_tol: self.abs_tol,
                ..AdaptiveOptions::default()
            }),
        }
    }

    pub fn t_end(&self) -> f64 {
        us(self.t_end_us)
    }

    pub fn sample_dt(&self) -> f64 {
        us(self.sample_dt_us)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsBlock {
    #[serde(default)]
    pub kind: TraceKind,
    #[serde(default)]
    pub trace: TraceBlock,
    /// Switch-off time for `switch_off` traces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_off_us: Option<f64>,
    /// Detector-window average applied to the written trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxcar_us: Option<f64>,
    /// Write per-shell coherences every this many samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    /// Fit b·exp(−2γ_EIT t) over the standard window.
    #[serde(default)]
    pub fit_buildup: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    #[default]
    Hwhm,
    Buildup,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanOmegaBlock {
    pub omegas_mhz: Vec<f64>,
    #[serde(default)]
    pub measure: Measure,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub trace: TraceBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanNBlock {
    pub n_eff: Vec<f64>,
    pub omega_c_mhz: f64,
    #[serde(default)]
    pub trace: TraceBlock,
    #[serde(default = "default_fit_half_span")]
    pub fit_half_span_mhz: f64,
    #[serde(default = "default_fit_step")]
    pub fit_step_mhz: f64,
}

fn default_fit_half_span() -> f64 {
    25.0
}

fn default_fit_step() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Lorentzian,
    Global,
    Buildup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    #[default]
    Reflectivity,
    Transmittivity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmBlock {
    #[serde(default = "lm_defaults::max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "lm_defaults::step_tol")]
    pub step_tol: f64,
    #[serde(default = "lm_defaults::fd_step")]
    pub fd_step: f64,
    #[serde(default = "lm_defaults::gradient_tol")]
    pub gradient_tol: f64,
    #[serde(default = "lm_defaults::residual_floor")]
    pub residual_floor: f64,
    #[serde(default = "lm_defaults::initial_damping")]
    pub initial_damping: f64,
}

mod lm_defaults {
    use eitlab_core::fit::LmOptions;

    pub fn max_iterations() -> usize {
        LmOptions::default().max_iterations
    }
    pub fn step_tol() -> f64 {
        LmOptions::default().step_tol
    }
    pub fn fd_step() -> f64 {
        LmOptions::default().fd_step
    }
    pub fn gradient_tol() -> f64 {
        LmOptions::default().gradient_tol
    }
    pub fn residual_floor() -> f64 {
        LmOptions::default().residual_floor
    }
    pub fn initial_damping() -> f64 {
        LmOptions::default().initial_damping
    }
}

impl Default for LmBlock {
    fn default() -> Self {
        Self {
            max_iterations: lm_defaults::max_iterations(),
            step_tol: lm_defaults::step_tol(),
            fd_step: lm_defaults::fd_step(),
            gradient_tol: lm_defaults::gradient_tol(),
            residual_floor: lm_defaults::residual_floor(),
            initial_damping: lm_defaults::initial_damping(),
        }
    }
}

impl LmBlock {
    pub fn options(&self) -> eitlab_core::fit::LmOptions {
        eitlab_core::fit::LmOptions {
            max_iterations: self.max_iterations,
            step_tol: self.step_tol,
            fd_step: self.fd_step,
            gradient_tol: self.gradient_tol,
            residual_floor: self.residual_floor,
            initial_damping: self.initial_damping,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    pub kind: FitKind,
    /// Spectrum CSVs (lorentzian, global) or trace CSVs (buildup), relative
    /// to the config file.
    pub data: Vec<String>,
    #[serde(default)]
    pub observable: ObservableKind,
    #[serde(default)]
    pub model: ModelKind,
    /// Global fit starting value for g_N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_n_guess_mhz: Option<f64>,
    /// One control Rabi frequency per dataset: a starting value, or the
    /// fixed value when `fix_control` is set.
    #[serde(default)]
    pub omega_c_mhz: Vec<f64>,
    #[serde(default)]
    pub fix_control: bool,
    /// Buildup window; both default to the standard window when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_start_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_end_us: Option<f64>,
    /// Multiplicative Gaussian noise added to the data before fitting,
    /// drawn from the scenario seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_rel: Option<f64>,
    #[serde(default)]
    pub lm: LmBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceBlock {
    pub figure: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default)]
    pub svg: bool,
}

fn default_out_dir() -> String {
    "out".into()
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: default_out_dir(), svg: false }
    }
}

/// Reads and validates a config. JSON errors carry the line, column and
/// field path.
pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::schema(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::schema(format!("line {} column {}, field `{path}`: {inner}", inner.line(), inner.column()))
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::schema(format!(
            "field `schema_version`: unsupported version {} (this build reads version {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

impl ScenarioConfig {
    /// Checks that the config describes exactly the requested mode.
    pub fn check_mode(&self, mode: Mode) -> Result<(), CliError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(CliError::schema(format!("field `mode`: config is for `{m}` but `{mode}` was requested")));
            }
        }
        let present = [
            (Mode::Spectrum, self.spectrum.is_some()),
            (Mode::Dynamics, self.dynamics.is_some()),
            (Mode::ScanOmega, self.scan_omega.is_some()),
            (Mode::ScanN, self.scan_n.is_some()),
            (Mode::Fit, self.fit.is_some()),
            (Mode::Reproduce, self.reproduce.is_some()),
        ];
        for (m, has) in present {
            if has && m != mode {
                return Err(CliError::schema(format!("field `{}`: block belongs to mode `{m}`, not `{mode}`", block_name(m))));
            }
        }
        let has_own = present.iter().any(|(m, has)| *m == mode && *has);
        if !has_own && matches!(mode, Mode::Spectrum | Mode::ScanOmega | Mode::ScanN | Mode::Fit | Mode::Reproduce) {
            return Err(CliError::schema(format!("field `{}`: required for mode `{mode}`", block_name(mode))));
        }
        Ok(())
    }
}

fn block_name(m: Mode) -> &'static str {
    match m {
        Mode::Spectrum => "spectrum",
        Mode::Dynamics => "dynamics",
        Mode::ScanOmega => "scan_omega",
        Mode::ScanN => "scan_n",
        Mode::Fit => "fit",
        Mode::Reproduce => "reproduce",
    }
}

/// Grid spacing for the spectrum block, rad/s.
pub fn spectrum_grid(block: &SpectrumBlock) -> (f64, f64, f64) {
    (mhz(block.delta_min_mhz), mhz(block.delta_max_mhz), mhz(block.step_mhz))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spectrum_config() {
        let cfg = parse(
            r#"{"schema_version": 1, "params": {"g_n_mhz": 13.9},
                "spectrum": {"delta_min_mhz": -25, "delta_max_mhz": 25, "step_mhz": 0.005}}"#,
        )
        .unwrap();
        assert!(cfg.check_mode(Mode::Spectrum).is_ok());
        assert_eq!(cfg.spectrum.unwrap().model, ModelKind::Continuous);
        assert_eq!(cfg.output.dir, "out");
    }

    #[test]
    fn unknown_field_names_its_path() {
        let err = parse(r#"{"schema_version": 1, "params": {"g_N": 13.9}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1") && msg.contains("params"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn wrong_version_is_rejected() {
        assert!(parse(r#"{"schema_version": 7}"#).unwrap_err().to_string().contains("schema_version"));
    }

    #[test]
    fn foreign_blocks_are_rejected() {
        let cfg = parse(r#"{"schema_version": 1, "reproduce": {"figure": "fig3"}}"#).unwrap();
        assert!(cfg.check_mode(Mode::Reproduce).is_ok());
        assert!(cfg.check_mode(Mode::Spectrum).is_err());
        let cfg = parse(r#"{"schema_version": 1, "mode": "fit"}"#).unwrap();
        assert!(cfg.check_mode(Mode::Dynamics).is_err());
    }

    #[test]
    fn nested_trace_settings() {
        let cfg = parse(r#"{"schema_version": 1, "dynamics": {"kind": "switch_off", "t_off_us": 3, "trace": {"t_end_us": 6, "method": "adaptive"}}}"#).unwrap();
        let d = cfg.dynamics.unwrap();
        assert_eq!(d.kind, TraceKind::SwitchOff);
        assert_eq!(d.trace.t_end_us, 6.0);
        assert_eq!(d.trace.sample_dt_us, 0.01);
        assert!(matches!(d.trace.method(), Method::Adaptive(_)));
    }
}
