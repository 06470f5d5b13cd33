use noisebath::circuit::{self, Schedule};
use noisebath::coarse_grain::{self, FitConfig, InitialGuess, LorentzianBath};
use noisebath::lindblad::{self, IntegrateOptions};
use noisebath::linalg::{self, CMatrix, C64};
use noisebath::noisy_sim::{self, SimRun};
use noisebath::observable::{Observable, Trajectory};
use noisebath::spectral::{LorentzianMode, MultiChannelTarget, SpectralTarget};
use noisebath::spin_model::{self, Decomposition, NoiseProfile, SpinBathModel, SystemNoise, SystemSpec, TrotterPlan};
use proptest::prelude::*;

fn one_mode_model(spins: usize, delta: f64) -> SpinBathModel {
    let bath = LorentzianBath::single(&[(1.0, 1.0, 0.5)]);
    let noise = NoiseProfile { dephasing_ratio: 0.5, system: SystemNoise::Noiseless };
    spin_model::bosons_to_spins(&bath, &[spins], &SystemSpec::single(delta), &noise).unwrap()
}

fn plus_state(n: usize) -> CMatrix {
    let plus = CMatrix::from_element(2, 2, C64::new(0.5, 0.0));
    lindblad::product_initial_state(&vec![2; n], 1, &plus).unwrap()
}

fn simulate(model: &SpinBathModel, eps: f64, steps: usize) -> (Trajectory, f64) {
    let depth = model.table_depth(Decomposition::NativeMS, spin_model::Connectivity::AllToAll).unwrap();
    let plan = TrotterPlan::new(model, Decomposition::NativeMS, depth, eps, steps).unwrap();
    let step = circuit::trotter_step(model, &plan).unwrap();
    let n = model.n_qubits();
    let sx = Observable::on_qubits("sx", &linalg::sigma_x(), &[0], n).unwrap();
    let run = SimRun::new(Schedule::plain(step), steps, plus_state(n), vec![sx], plan.strengths.clone(), plan.tau);
    (noisy_sim::run(&run).unwrap(), plan.tau)
}

#[test]
fn noisy_circuit_follows_the_spin_oracle() {
    let model = one_mode_model(2, 0.9);
    let (sim, tau) = simulate(&model, 0.01, 120);
    let spec = lindblad::build_spin_lindblad(&model).unwrap();
    let dt = lindblad::suggest_dt(&spec, tau);
    let every = (tau / dt).round() as usize;
    let sx = Observable::on_qubits("sx", &linalg::sigma_x(), &[0], model.n_qubits()).unwrap();
    let oracle = lindblad::integrate(&spec, &plus_state(model.n_qubits()), &IntegrateOptions::new(120.0 * tau, dt, every), &[sx]).unwrap();
    let (a, b) = (sim.column("sx").unwrap(), oracle.column("sx").unwrap());
    assert_eq!(a.len(), b.len());
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 0.03, "{worst}");
    // the bath actually does something over this window
    assert!(a.iter().cloned().fold(f64::INFINITY, f64::min) < 0.5);
}

#[test]
fn fit_recovers_a_two_mode_target() {
    let modes = vec![LorentzianMode { weight: 0.3, center: 1.0, width: 0.4 }, LorentzianMode { weight: 0.1, center: 2.5, width: 0.4 }];
    let target = SpectralTarget::LorentzianSum { modes, background: 0.0 };
    // local convergence from a start about 20% off in every parameter
    let mut config = FitConfig::new(2, (-1.0, 4.0));
    config.initial_guess = InitialGuess::UserProvided(LorentzianBath::single(&[(0.45, 1.2, 0.5), (0.35, 2.1, 0.5)]));
    let res = coarse_grain::fit(&MultiChannelTarget::single(target.clone()), &config).unwrap();
    assert!(res.converged);
    assert!(res.rms_residual < 1e-6, "{}", res.rms_residual);
    let mut centers: Vec<f64> = res.bath.modes.iter().map(|m| m.center).collect();
    centers.sort_by(f64::total_cmp);
    assert!((centers[0] - 1.0).abs() < 1e-4 && (centers[1] - 2.5).abs() < 1e-4, "{centers:?}");
    for w in [-0.5, 0.7, 1.9, 3.3] {
        assert!((res.bath.spectral(w, 0, 0).re - target.eval(w).unwrap()).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noisy_trajectories_stay_bounded(eps in 0.0f64..0.05, delta in -2.0f64..2.0, spins in 1usize..3) {
        let model = one_mode_model(spins, delta);
        let (traj, _) = simulate(&model, eps.max(1e-4), 10);
        for x in traj.column("sx").unwrap() {
            prop_assert!(x.abs() <= 1.0 + 1e-12);
        }
    }
}
