//! Benchmark inputs shared by the criterion benches.

use noisebath::spin_model::Decomposition;
use noisebath_cli::config::ExperimentConfig;
use noisebath_cli::presets;

/// One-mode model with `spins` bath qubits and `steps` Trotter steps.
pub fn one_mode(spins: usize, steps: usize) -> ExperimentConfig {
    let mut cfg = presets::example_a(spins, 0.01, Decomposition::NativeMS, 0.9);
    cfg.t_end = None;
    cfg.steps = Some(steps);
    cfg
}
