//! Randomised invariants of the susceptibilities and the steady-state response.

use approx::assert_relative_eq;
use eitlab_core::dynamics::discretize;
use eitlab_core::params::SystemParams;
use eitlab_core::spectrum::{atomic_transparency, reflectivity_transmittivity, response, scan_spectrum, CavityResponse};
use eitlab_core::susceptibility::{chi_canonical, chi_continuous, chi_quadrature, theta, SusceptibilityModel};
use eitlab_core::units::{khz, mhz};
use eitlab_core::Execution;
use num_complex::Complex64;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = SystemParams> {
    (0.0..20.0f64, 0.0..10.0f64, 0.0..10.0f64)
        .prop_map(|(g, om, g0)| SystemParams::reference(mhz(g), mhz(om)).with_gamma0(khz(g0)).unwrap())
}

fn detuning() -> impl Strategy<Value = f64> {
    prop_oneof![-50.0..50.0f64, -0.2..0.2f64].prop_map(mhz)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_variant_is_passive(p in params(), d in detuning()) {
        for model in [SusceptibilityModel::Continuous, SusceptibilityModel::Canonical, SusceptibilityModel::Quadrature] {
            let chi = model.chi(&p, d).unwrap();
            prop_assert!(chi.absorption() >= 0.0, "{:?} {}", model, chi.value);
        }
    }

    #[test]
    fn reflectivity_is_even_in_detuning(p in params(), d in detuning()) {
        for model in [SusceptibilityModel::Continuous, SusceptibilityModel::Canonical] {
            let plus = response(&p, &model, d).unwrap().reflectivity;
            let minus = response(&p, &model, -d).unwrap().reflectivity;
            prop_assert!((plus - minus).abs() <= 1e-12);
        }
    }

    #[test]
    fn energy_is_conserved(p in params(), d in detuning()) {
        let r = response(&p, &SusceptibilityModel::Continuous, d).unwrap();
        prop_assert!((r.balance() - 1.0).abs() <= 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r.reflectivity));
        prop_assert!(r.transmittivity >= 0.0);
    }

    #[test]
    fn ratios_do_not_depend_on_input_amplitude(p in params(), d in detuning(), scale in 1e-3..1e3f64) {
        let chi = SusceptibilityModel::Continuous.chi(&p, d).unwrap().value;
        let a_in = Complex64::new(scale, 0.0);
        let (r1, t1) = reflectivity_transmittivity(d, chi, &p.cavity, Complex64::new(1.0, 0.0)).unwrap();
        let (r2, t2) = reflectivity_transmittivity(d, chi, &p.cavity, a_in).unwrap();
        prop_assert!((r1 - r2).abs() <= 1e-12 && (t1 - t2).abs() <= 1e-12);
        let small = CavityResponse::new(d, chi, &p.cavity, Complex64::new(1.0, 0.0)).unwrap();
        let large = CavityResponse::new(d, chi, &p.cavity, a_in).unwrap();
        prop_assert!((large.amplitude / scale - small.amplitude).norm() <= 1e-12 * small.amplitude.norm().max(1e-300));
    }

    #[test]
    fn theta_stays_off_the_cut(p in params(), d in detuning()) {
        let t = theta(d, p.gamma(), p.gamma0(), p.omega_c()).unwrap();
        prop_assert!(t.branch_safe());
    }

    #[test]
    fn closed_form_matches_quadrature(p in params(), d in detuning()) {
        let a = chi_continuous(d, p.g_n(), p.gamma(), p.gamma0(), p.omega_c()).unwrap().value;
        let b = chi_quadrature(d, p.g_n(), p.gamma(), p.gamma0(), p.omega_c(), 1.0).unwrap().value;
        prop_assert!((a - b).norm() <= 1e-8 * b.norm().max(1e-300));
    }

    #[test]
    fn shell_model_converges_to_continuum(p in params(), d in detuning()) {
        let shells = discretize(64, 1.0).unwrap();
        let a = shells.chi(&p, d).unwrap().value;
        let b = chi_continuous(d, p.g_n(), p.gamma(), p.gamma0(), p.omega_c()).unwrap().value;
        prop_assert!((a - b).norm() <= 1e-8 * b.norm().max(1e-300));
    }

    #[test]
    fn transparency_grows_with_control(g in 1.0..20.0f64, om in 0.5..9.0f64) {
        let p = SystemParams::reference(mhz(g), mhz(om));
        let dark = atomic_transparency(&p.with_omega_c(0.0).unwrap(), &SusceptibilityModel::Continuous).unwrap();
        let lit = atomic_transparency(&p, &SusceptibilityModel::Continuous).unwrap();
        prop_assert!(lit > dark);
    }
}

#[test]
fn no_control_reduces_every_variant_to_two_level() {
    let p = SystemParams::reference(mhz(13.6), 0.0);
    for d in [0.0, mhz(0.3), mhz(-7.0), mhz(25.0)] {
        let two_level = Complex64::i() * p.g_n().powi(2) / Complex64::new(p.gamma(), -d);
        let cont = chi_continuous(d, p.g_n(), p.gamma(), p.gamma0(), 0.0).unwrap().value;
        let can = chi_canonical(d, p.g_n(), p.gamma(), p.gamma0(), 0.0).unwrap().value;
        assert_relative_eq!(cont.re, two_level.re, max_relative = 1e-14, epsilon = 1e-3);
        assert_relative_eq!(cont.im, two_level.im, max_relative = 1e-14);
        assert_relative_eq!(can.im, two_level.im, max_relative = 1e-14);
    }
}

#[test]
fn weak_control_leaves_the_variants_close() {
    // Θ → 0: ln(1+Θ)/Θ ≈ 1 − Θ/2 and 1/(1+Θ) ≈ 1 − Θ agree to first order in χ
    let p = SystemParams::reference(mhz(13.6), khz(5.0));
    let d = mhz(5.0);
    let cont = chi_continuous(d, p.g_n(), p.gamma(), p.gamma0(), p.omega_c()).unwrap().value;
    let can = chi_canonical(d, p.g_n(), p.gamma(), p.gamma0(), p.omega_c()).unwrap().value;
    assert!((cont - can).norm() <= 1e-6 * cont.norm());
}

#[test]
fn sequential_and_parallel_scans_are_identical() {
    let p = SystemParams::reference(mhz(13.6), mhz(4.1));
    let range = (mhz(-3.0), mhz(3.0));
    let a = scan_spectrum(&p, range, khz(5.0), &SusceptibilityModel::Continuous, Execution::Sequential).unwrap();
    let b = scan_spectrum(&p, range, khz(5.0), &SusceptibilityModel::Continuous, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}
