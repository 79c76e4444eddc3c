//! Fits against synthetic data with known truth.

use eitlab_core::dynamics::{discretize, step_response, DynamicsTrace, TraceRow};
use eitlab_core::fit::{
    fit_exponential_buildup, fit_lorentzian, fit_scaling, fit_spectrum_global, lorentzian_dip, BuildupWindow, ControlRabi,
    GlobalFitSpec, LmOptions, Observable,
};
use eitlab_core::params::SystemParams;
use eitlab_core::presets;
use eitlab_core::spectrum::{scan_spectrum, SpectrumRow, SpectrumTable};
use eitlab_core::susceptibility::{SusceptibilityModel, Variant};
use eitlab_core::units::{khz, mhz, us};
use eitlab_core::{Error, Execution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;

fn noisy_dip(seed: u64, noise: f64) -> SpectrumTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (-200..=200)
        .map(|i| {
            let d = f64::from(i) * khz(2.0);
            let clean = lorentzian_dip(d, khz(3.0), khz(47.5), 0.3, 0.9);
            let jitter: f64 = rng.random_range(-1.0..1.0) * 3f64.sqrt();
            SpectrumRow { delta: d, reflectivity: clean * (1.0 + noise * jitter), transmittivity: 0.0, photon_number: 0.0 }
        })
        .collect();
    SpectrumTable { rows, variant: Variant::Continuous }
}

#[test]
fn lorentzian_with_one_percent_noise() {
    let fit = fit_lorentzian(&noisy_dip(7, 0.01)).unwrap();
    let hwhm = fit.get("hwhm").unwrap();
    assert!((hwhm.value - khz(47.5)).abs() <= 4.0 * hwhm.sigma, "{:?}", fit);
    assert!((hwhm.value / khz(47.5) - 1.0).abs() < 0.05);
    assert!((fit.value("center") - khz(3.0)).abs() < khz(3.0));
}

#[test]
fn lorentzian_fit_is_reproducible_for_a_seed() {
    let a = fit_lorentzian(&noisy_dip(11, 0.01)).unwrap();
    let b = fit_lorentzian(&noisy_dip(11, 0.01)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn global_fit_recovers_the_power_scan() {
    let truth = SystemParams::reference(mhz(presets::POWER_SCAN_G_N_MHZ), 0.0);
    let datasets: Vec<SpectrumTable> = presets::POWER_SCAN_OMEGAS_MHZ
        .iter()
        .map(|&om| {
            let p = truth.with_omega_c(mhz(om)).unwrap();
            scan_spectrum(&p, (mhz(-1.0), mhz(1.0)), khz(5.0), &SusceptibilityModel::Continuous, Execution::Parallel).unwrap()
        })
        .collect();
    let spec = GlobalFitSpec {
        base: truth,
        model: SusceptibilityModel::Continuous,
        observable: Observable::Reflectivity,
        g_n_guess: mhz(14.0),
        control: presets::POWER_SCAN_OMEGAS_MHZ.iter().map(|&om| ControlRabi::Free(mhz(0.9 * om))).collect(),
        options: LmOptions::default(),
    };
    let fit = fit_spectrum_global(&datasets, &spec).unwrap();
    assert!((fit.value("g_n") / mhz(16.2) - 1.0).abs() < 1e-6);
    for (k, om) in presets::POWER_SCAN_OMEGAS_MHZ.iter().enumerate() {
        assert!((fit.value(&format!("omega_c_{k}")) / mhz(*om) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn transmission_fit_with_fixed_control() {
    let truth = SystemParams::reference(mhz(13.8), mhz(4.1));
    let data = scan_spectrum(&truth, (mhz(-20.0), mhz(20.0)), khz(100.0), &SusceptibilityModel::Continuous, Execution::Parallel).unwrap();
    let spec = GlobalFitSpec {
        base: truth,
        model: SusceptibilityModel::Continuous,
        observable: Observable::Transmittivity,
        g_n_guess: mhz(12.0),
        control: vec![ControlRabi::Fixed(mhz(4.1))],
        options: LmOptions::default(),
    };
    let fit = fit_spectrum_global(&[data], &spec).unwrap();
    assert!((fit.value("g_n") / mhz(13.8) - 1.0).abs() < 1e-6);
}

#[test]
fn buildup_fit_recovers_a_pure_exponential() {
    let shells = discretize(8, 1.0).unwrap();
    let template = step_response(&SystemParams::reference(mhz(13.6), mhz(4.1)), &shells, us(3.0), us(0.01)).unwrap();
    let trace = DynamicsTrace {
        rows: template.rows.iter().map(|r| TraceRow { reflectivity: 0.4 * (-2.0 * khz(55.0) * r.t).exp(), ..*r }).collect(),
        ..template
    };
    let fit = fit_exponential_buildup(&trace, BuildupWindow { start: us(0.2), end: us(2.5) }).unwrap();
    assert!((fit.value("gamma_eit") / khz(55.0) - 1.0).abs() < 1e-8);
    assert!((fit.value("b") / 0.4 - 1.0).abs() < 1e-8);
}

#[test]
fn short_window_is_rejected() {
    let shells = discretize(8, 1.0).unwrap();
    let trace = step_response(&SystemParams::reference(mhz(13.6), mhz(4.1)), &shells, us(1.0), us(0.1)).unwrap();
    let err = fit_exponential_buildup(&trace, BuildupWindow { start: us(0.5), end: us(0.7) }).unwrap_err();
    assert!(matches!(err, Error::InsufficientData { .. }));
}

#[test]
fn buildup_rates_grow_with_control_power() {
    let base = SystemParams::reference_with_cooperativity(presets::SIM_COOPERATIVITY, 0.0);
    let shells = discretize(64, 1.0).unwrap();
    let rates: Vec<f64> = [3.0, 5.0, 7.0, 9.0]
        .iter()
        .map(|&om| {
            let p = base.with_omega_c(mhz(om)).unwrap();
            let trace = step_response(&p, &shells, us(4.0), us(0.01)).unwrap();
            let window = BuildupWindow::for_model(&p, &shells, &trace).unwrap();
            fit_exponential_buildup(&trace, window).unwrap().value("gamma_eit")
        })
        .collect();
    assert!(rates.windows(2).all(|w| w[1] > w[0]), "{rates:?}");
}

#[test]
fn scaling_fit_on_exact_points() {
    let points = [(1.0, 3.0), (3.0, 7.0)];
    let fit = fit_scaling(&points, 1.0, 0.0).unwrap();
    assert!((fit.slope - 2.0).abs() < 1e-12 && (fit.offset - 1.0).abs() < 1e-12);
    assert!((fit.alpha - 0.25).abs() < 1e-12);
    assert!(matches!(fit_scaling(&[(1.0, 1.0), (1.0, 2.0)], 1.0, 0.0), Err(Error::DegenerateFit(_))));
}
