//! Configurations of the three worked examples and the Δ sweep of the third.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use noisebath::analysis::Window;
use noisebath::spectral::{LorentzianMode, SetStructured, SpectralTarget, Temperature};
use noisebath::spin_model::{Connectivity, Decomposition};

use crate::config::{ExperimentConfig, FitSettings};
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, SteadyReport};

/// Spin coupled to one broad mode, v = ω₀ = 2κ, in units of ω₀.
pub fn example_a(spins: usize, eps: f64, decomposition: Decomposition, delta: f64) -> ExperimentConfig {
    let (v, w0, kappa) = (1.0, 1.0, 0.5);
    ExperimentConfig {
        name: "example-a".into(),
        target: SpectralTarget::LorentzianSum { modes: vec![LorentzianMode { weight: v * v, center: w0, width: kappa }], background: 0.0 },
        fit: None,
        two_bath: false,
        delta,
        spins_per_mode: spins,
        multiplicities: None,
        decomposition,
        gate_error: eps,
        dephasing_ratio: 0.5,
        system_noise: false,
        r: None,
        symmetrize: false,
        steps: None,
        t_end: Some(12.0 / v),
        observables: vec!["sx".into()],
        output_dir: None,
        oracle: true,
        boson_oracle: None,
        fft: true,
        window: Window::None,
        connectivity: Connectivity::AllToAll,
        steady_state: false,
    }
}

pub const EXAMPLE_B_MODES: usize = 8;
pub const EXAMPLE_B_WINDOW: (f64, f64) = (-4.0, 12.0);

/// Ohmic bath at T = 1.5Δ with exponential cutoff 10Δ, in units of Δ.
pub fn ohmic_target(alpha: f64) -> SpectralTarget {
    SpectralTarget::Ohmic { alpha, temperature: Temperature::new(1.5).expect("positive"), cutoff: 10.0 }
}

pub fn example_b(alpha: f64, eps: f64) -> ExperimentConfig {
    ExperimentConfig {
        name: "example-b".into(),
        target: ohmic_target(alpha),
        fit: Some(FitSettings::new(EXAMPLE_B_MODES, EXAMPLE_B_WINDOW)),
        two_bath: false,
        delta: 1.0,
        spins_per_mode: 1,
        multiplicities: None,
        decomposition: Decomposition::NativeMS,
        gate_error: eps,
        dephasing_ratio: 0.0,
        system_noise: false,
        r: None,
        symmetrize: false,
        steps: None,
        t_end: Some(20.0),
        observables: vec!["sx".into()],
        output_dir: None,
        oracle: true,
        boson_oracle: None,
        fft: false,
        window: Window::None,
        connectivity: Connectivity::AllToAll,
        steady_state: false,
    }
}

pub const EXAMPLE_C_WINDOW: (f64, f64) = (-1.0, 3.5);

/// SET island charge with two identical baths, in units of ω₀.
pub fn example_c(alpha: f64, delta: f64, system_noise: Option<f64>) -> ExperimentConfig {
    ExperimentConfig {
        name: "example-c".into(),
        target: SpectralTarget::Set(SetStructured::standard(1.0).with_alpha(alpha)),
        fit: Some(FitSettings::new(2, EXAMPLE_C_WINDOW)),
        two_bath: true,
        delta,
        spins_per_mode: 1,
        multiplicities: None,
        decomposition: Decomposition::NativeMS,
        gate_error: 0.01,
        dephasing_ratio: 0.0,
        system_noise: system_noise.is_some(),
        r: system_noise,
        symmetrize: system_noise.is_some(),
        steps: None,
        t_end: Some(40.0),
        observables: vec!["sx".into(), "charge".into()],
        output_dir: None,
        oracle: true,
        boson_oracle: None,
        fft: true,
        window: Window::None,
        connectivity: Connectivity::AllToAll,
        steady_state: true,
    }
}

/// Equilibrium occupation of the upper level, 1/(e^{Δ/T} + 1).
pub fn fermi(delta: f64, temperature: f64) -> f64 {
    1.0 / ((delta / temperature).exp() + 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub simulator: f64,
    pub oracle: f64,
    pub fermi: f64,
    pub steady: SteadyReport,
}

pub fn delta_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect()
}

/// Steady island charge over a Δ grid; the fit is done once and shared.
pub fn sweep_c(alpha: f64, deltas: &[f64], system_noise: Option<f64>, threads: Option<usize>) -> CliResult<Vec<SweepPoint>> {
    let mut base = example_c(alpha, 1.0, system_noise);
    base.t_end = None;
    let (bath, _) = pipeline::obtain_bath(&base)?;
    let temperature = SetStructured::standard(1.0).temperature.value();
    let point = |&delta: &f64| -> CliResult<SweepPoint> {
        let p = prepare_with_bath(&base, delta, &bath)?;
        let steady = p.steady_states()?;
        Ok(SweepPoint {
            delta,
            simulator: steady.value("charge", false).unwrap_or(f64::NAN),
            oracle: steady.value("charge", true).unwrap_or(f64::NAN),
            fermi: fermi(delta, temperature),
            steady,
        })
    };
    let run = || deltas.par_iter().map(point).collect::<CliResult<Vec<_>>>();
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// `prepare` with a precomputed bath in place of the fit.
pub fn prepare_with_bath(base: &ExperimentConfig, delta: f64, bath: &noisebath::coarse_grain::LorentzianBath) -> CliResult<pipeline::Prepared> {
    let mut cfg = base.clone();
    cfg.delta = delta;
    pipeline::prepare_from_bath(&cfg, bath.clone(), None)
}

/// NOISEBATH_THREADS, when set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("NOISEBATH_THREADS").ok()?.trim().parse().ok().filter(|n: &usize| *n > 0)
}
