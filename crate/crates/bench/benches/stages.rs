use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use noisebath::circuit;
use noisebath::coarse_grain::{self, FitConfig};
use noisebath::effective_noise;
use noisebath::lindblad::{self, IntegrateOptions};
use noisebath::spectral::MultiChannelTarget;
use noisebath_bench::one_mode;
use noisebath_cli::pipeline;
use noisebath_cli::presets;

fn fit(c: &mut Criterion) {
    let target = MultiChannelTarget::single(presets::ohmic_target(0.1));
    let cfg = FitConfig::new(presets::EXAMPLE_B_MODES, presets::EXAMPLE_B_WINDOW);
    c.bench_function("fit ohmic, 8 modes", |b| b.iter(|| coarse_grain::fit(black_box(&target), &cfg).unwrap()));
}

fn simulator(c: &mut Criterion) {
    let mut g = c.benchmark_group("noisy simulator, 20 steps");
    g.sample_size(10);
    for spins in [2usize, 4, 6] {
        let p = pipeline::prepare(&one_mode(spins, 20)).unwrap();
        g.bench_function(format!("{spins} bath qubits"), |b| b.iter(|| p.simulate().unwrap()));
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("spin oracle, one Trotter step");
    g.sample_size(10);
    for spins in [2usize, 4, 6] {
        let p = pipeline::prepare(&one_mode(spins, 1)).unwrap();
        let spec = p.spin_oracle_spec().unwrap();
        let dt = lindblad::suggest_dt(&spec, p.plan.tau);
        let rho0 = pipeline::initial_state(&spec.dims).unwrap();
        let opts = IntegrateOptions::new(p.plan.tau, dt, 1);
        g.bench_function(format!("{spins} bath qubits"), |b| b.iter(|| lindblad::integrate(&spec, &rho0, &opts, &[]).unwrap()));
    }
    g.finish();
}

fn effective(c: &mut Criterion) {
    let p = pipeline::prepare(&one_mode(2, 1)).unwrap();
    let step = circuit::trotter_step(&p.model, &p.plan).unwrap();
    c.bench_function("effective Lindbladian, 2 bath qubits", |b| {
        b.iter(|| effective_noise::effective_lindblad(black_box(&step), &p.plan.strengths, p.plan.tau).unwrap())
    });
}

criterion_group!(benches, fit, simulator, oracle, effective);
criterion_main!(benches);
