use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::error::{invalid, require_positive, Result};
use crate::params::SystemParams;
use crate::susceptibility::{ComplexSusceptibility, Variant};

/// How the probe-intensity axis u ∈ (0, 1] is cut into shells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShellGrid {
    /// M equal cells, one shell at each cell midpoint.
    Uniform,
    /// Cell edges at (i/M)^power, midpoint shells.
    Graded { power: f64 },
    /// Gauss–Legendre nodes in x, with u = ((1+scale)^x − 1)/scale. Weakly
    /// dressed ions near u → 0 make the integrand steep on a scale
    /// u ~ 2γγ₀/Ω_c², which the logarithmic map resolves.
    LogGauss { scale: f64 },
}

/// Scale of the default [`ShellGrid::LogGauss`] map.
pub const DEFAULT_LOG_SCALE: f64 = 1e4;

impl Default for ShellGrid {
    fn default() -> Self {
        ShellGrid::LogGauss { scale: DEFAULT_LOG_SCALE }
    }
}

/// One radial shell of the ensemble, in mode-intensity coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shell {
    /// Probe intensity at the cell midpoint, u_k = Ψ_p²(r_k).
    pub u: f64,
    /// Cell width; the share of g_N² carried by this shell.
    pub weight: f64,
}

/// Radial-shell model of the ensemble: each shell couples to the probe with
/// G_k = g_N·√weight_k and to the control with Ω̄_c·u_k^(β/2). The steady
/// state of the shell model is the midpoint rule for the radial integral.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellDiscretization {
    shells: Vec<Shell>,
    beta: f64,
    grid: ShellGrid,
}

/// Shells on the default grid.
pub fn discretize(m: usize, beta: f64) -> Result<ShellDiscretization> {
    discretize_on(m, beta, ShellGrid::default())
}

pub fn discretize_on(m: usize, beta: f64, grid: ShellGrid) -> Result<ShellDiscretization> {
    if m == 0 {
        return Err(invalid("shells", "at least one shell is required"));
    }
    require_positive("beta", beta)?;
    let mut shells = match grid {
        ShellGrid::Uniform => midpoint_cells(m, |x| x),
        ShellGrid::Graded { power } => {
            require_positive("grading power", power)?;
            midpoint_cells(m, |x| x.powf(power))
        }
        ShellGrid::LogGauss { scale } => {
            require_positive("log scale", scale)?;
            log_gauss(m, scale)
        }
    };
    // innermost shell (u closest to 1) first
    shells.sort_by(|a, b| b.u.total_cmp(&a.u));
    Ok(ShellDiscretization { shells, beta, grid })
}

fn midpoint_cells(m: usize, edge: impl Fn(f64) -> f64) -> Vec<Shell> {
    (0..m)
        .map(|i| {
            let (lo, hi) = (edge(i as f64 / m as f64), edge((i + 1) as f64 / m as f64));
            Shell { u: 0.5 * (lo + hi), weight: hi - lo }
        })
        .collect()
}

fn log_gauss(m: usize, scale: f64) -> Vec<Shell> {
    let log = scale.ln_1p();
    let map = |x: f64| Shell { u: (x * log).exp_m1() / scale, weight: log * (x * log).exp() / scale };
    if m == 1 {
        let s = map(0.5);
        return vec![Shell { u: s.u, weight: 1.0 }];
    }
    let rule = GaussLegendre::new(m).expect("degree is at least 2");
    let mut shells: Vec<Shell> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(node, w)| {
            let s = map(0.5 * (node + 1.0));
            Shell { u: s.u, weight: 0.5 * w * s.weight }
        })
        .collect();
    // make the weights sum to one exactly so that Σ G_k² = g_N²
    let total: f64 = shells.iter().map(|s| s.weight).sum();
    for s in &mut shells {
        s.weight /= total;
    }
    shells
}

impl ShellDiscretization {
    pub fn len(&self) -> usize {
        self.shells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shells.is_empty()
    }

    pub fn shells(&self) -> &[Shell] {
        &self.shells
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn grid(&self) -> ShellGrid {
        self.grid
    }

    /// Per-shell collective probe couplings G_k.
    pub fn probe_couplings(&self, g_n: f64) -> Vec<f64> {
        self.shells.iter().map(|s| g_n * s.weight.sqrt()).collect()
    }

    /// Per-shell control Rabi frequencies Ω̄_c·u_k^(β/2), with Ω̄_c = Ω_c/√2.
    pub fn control_rabi(&self, omega_c: f64) -> Vec<f64> {
        let bar = omega_c / std::f64::consts::SQRT_2;
        self.shells.iter().map(|s| bar * s.u.powf(0.5 * self.beta)).collect()
    }

    /// Steady-state susceptibility of the shell model.
    pub fn chi(&self, params: &SystemParams, delta: f64) -> Result<ComplexSusceptibility> {
        let optical = Complex64::new(params.gamma(), -delta);
        let ground = Complex64::new(params.gamma0(), -delta);
        let g_n_sq = params.g_n() * params.g_n();
        let half_omega_sq = 0.5 * params.omega_c() * params.omega_c();
        let mut sum = Complex64::new(0.0, 0.0);
        for s in &self.shells {
            let dressing = half_omega_sq * s.u.powf(self.beta);
            if dressing == 0.0 {
                sum += s.weight / optical;
            } else if ground.norm() > 0.0 {
                sum += s.weight / (optical + dressing / ground);
            }
        }
        Ok(ComplexSusceptibility { value: Complex64::new(0.0, 1.0) * g_n_sq * sum, variant: Variant::Shells })
    }
}
