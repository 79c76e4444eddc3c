//! Transient response against independent references.

use eitlab_core::dynamics::{
    discretize, discretize_on, steady_state, step_response, step_response_with, AdaptiveOptions, DynamicsOptions, LinearSystem,
    Method, PropagationRoute, ShellGrid,
};
use eitlab_core::params::SystemParams;
use eitlab_core::spectrum::response;
use eitlab_core::susceptibility::SusceptibilityModel;
use eitlab_core::units::{mhz, us};
use num_complex::Complex64;

fn reference() -> SystemParams {
    SystemParams::reference(mhz(13.6), mhz(4.1))
}

#[test]
fn eigen_and_expm_routes_agree() {
    let p = reference();
    let shells = discretize(32, 1.0).unwrap();
    let opts = |route| DynamicsOptions { method: Method::Exact(route), snapshot_every: None };
    let eig = step_response_with(&p, &shells, us(3.0), us(0.05), &opts(PropagationRoute::Eigen)).unwrap();
    let exp = step_response_with(&p, &shells, us(3.0), us(0.05), &opts(PropagationRoute::Expm)).unwrap();
    for (a, b) in eig.amplitudes.iter().zip(&exp.amplitudes) {
        assert!((a - b).norm() <= 1e-9 * a.norm().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn adaptive_integrator_agrees_without_control() {
    let p = reference().with_omega_c(0.0).unwrap();
    let shells = discretize(16, 1.0).unwrap();
    let exact = step_response(&p, &shells, us(2.0), us(0.02)).unwrap();
    let rk = DynamicsOptions { method: Method::Adaptive(AdaptiveOptions::default()), snapshot_every: None };
    let adaptive = step_response_with(&p, &shells, us(2.0), us(0.02), &rk).unwrap();
    for (a, b) in exact.rows.iter().zip(&adaptive.rows) {
        assert!((a.reflectivity - b.reflectivity).abs() < 1e-8);
    }
}

#[test]
fn steady_state_solves_the_linear_system() {
    let p = reference();
    let shells = discretize(24, 1.0).unwrap();
    let x = steady_state(&p, &shells).unwrap();
    let sys = LinearSystem::new(&p, &shells, Complex64::new(p.drive.input_amplitude(), 0.0));
    let residual = sys.rhs(&x);
    assert!(residual.norm() <= 1e-9 * x.norm() * p.gamma());
}

#[test]
fn single_shell_settles_on_the_canonical_response() {
    let p = reference();
    let shells = discretize_on(1, 1.0, ShellGrid::Uniform).unwrap();
    let trace = step_response(&p, &shells, 2e-3, 1e-4).unwrap();
    let canonical = p.with_omega_c(p.omega_c() / 2f64.sqrt()).unwrap();
    let r = response(&canonical, &SusceptibilityModel::Canonical, 0.0).unwrap().reflectivity;
    assert!((trace.last().unwrap().reflectivity - r).abs() < 1e-6);
}

#[test]
fn photon_number_scales_with_input_flux() {
    let p = reference();
    let shells = discretize(16, 1.0).unwrap();
    let weak = step_response(&p, &shells, us(1.0), us(0.05)).unwrap();
    let strong_params = p.with_input_flux(p.drive.input_flux * 9.0).unwrap();
    let strong = step_response(&strong_params, &shells, us(1.0), us(0.05)).unwrap();
    for (a, b) in weak.rows.iter().zip(&strong.rows) {
        assert!((a.reflectivity - b.reflectivity).abs() < 1e-12);
        assert!((b.photon_number - 9.0 * a.photon_number).abs() <= 1e-9 * b.photon_number.max(1e-300));
    }
}

#[test]
fn buildup_falls_monotonically_then_recovers_to_the_steady_state() {
    let p = reference();
    let shells = discretize(64, 1.0).unwrap();
    let trace = step_response(&p, &shells, us(6.0), us(0.01)).unwrap();
    let window: Vec<f64> = trace.rows.iter().filter(|r| r.t > us(0.5)).map(|r| r.reflectivity).collect();
    assert!(window.windows(2).all(|w| w[1] < w[0]));
    // weakly dressed outer shells settle slowly, so R first undershoots R_ss
    let r_ss = response(&p, &SusceptibilityModel::Shells(shells.clone()), 0.0).unwrap().reflectivity;
    assert!(*window.last().unwrap() < r_ss);
    let late = step_response(&p, &shells, 5e-3, 5e-3).unwrap();
    assert!((late.last().unwrap().reflectivity - r_ss).abs() < 1e-6);
}
