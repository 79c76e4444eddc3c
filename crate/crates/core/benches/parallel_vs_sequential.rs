use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eitlab_core::dynamics::{discretize, step_response};
use eitlab_core::params::SystemParams;
use eitlab_core::spectrum::scan_spectrum;
use eitlab_core::susceptibility::{DiscreteEnsemble, DiskSampling, SusceptibilityModel};
use eitlab_core::units::{khz, mhz, um, us};
use eitlab_core::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn spectrum_scan(c: &mut Criterion) {
    let p = SystemParams::reference(mhz(13.6), mhz(4.1));
    let mut group = c.benchmark_group("scan_spectrum_quadrature");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| scan_spectrum(black_box(&p), (mhz(-5.0), mhz(5.0)), khz(20.0), &SusceptibilityModel::Quadrature, exec).unwrap())
        });
    }
    group.finish();
}

fn discrete_ensemble(c: &mut Criterion) {
    let p = SystemParams::reference(mhz(13.6), mhz(4.1));
    let w = um(37.0);
    let ens = DiscreteEnsemble::uniform_disk(1_000_000, 5.0 * w, w, w, p.g_n(), DiskSampling::Stratified, 1).unwrap();
    let mut group = c.benchmark_group("chi_discrete_1e6");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ens.chi(black_box(khz(30.0)), p.gamma(), p.gamma0(), p.omega_c(), exec).unwrap())
        });
    }
    group.finish();
}

fn control_sweep(c: &mut Criterion) {
    let base = SystemParams::reference_with_cooperativity(5.4, 0.0);
    let shells = discretize(64, 1.0).unwrap();
    let omegas = [1.0, 3.0, 5.0, 7.0, 9.0];
    let mut group = c.benchmark_group("buildup_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.map(&omegas, |&om| {
                    let p = base.with_omega_c(mhz(om)).unwrap();
                    step_response(&p, &shells, us(4.0), us(0.01)).unwrap().last().unwrap().reflectivity
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, spectrum_scan, discrete_ensemble, control_sweep);
criterion_main!(benches);
