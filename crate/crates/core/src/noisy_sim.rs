//! Density-matrix execution of Trotter schedules with amplitude damping and
//! dephasing applied to every qubit after every layer.

use nalgebra::DVector;

use crate::circuit::{Circuit, Gate, Schedule};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};
use crate::observable::{Diagnostics, Observable, Trajectory};
use crate::spin_model::LayerStrength;

pub const MAX_SIM_QUBITS: usize = 10;

pub fn apply_gate(rho: &mut CMatrix, gate: &Gate) {
    linalg::conjugate_local(rho, &gate.kind.matrix(), &gate.qubits);
}

/// Exact single-qubit damping (populations e^{−p_γ}) followed by dephasing
/// (coherences an extra e^{−p_Γ}) on qubit q.
pub fn apply_qubit_channel(rho: &mut CMatrix, q: usize, s: &LayerStrength) {
    if s.damping == 0.0 && s.dephasing == 0.0 {
        return;
    }
    let d = rho.nrows();
    let m = 1usize << q;
    let keep = (-s.damping).exp();
    let eta = 1.0 - keep;
    let coh = keep.sqrt() * (-s.dephasing).exp();
    let data = rho.as_mut_slice();
    for j in (0..d).filter(|j| j & m == 0) {
        let (c0, c1) = (j * d, (j | m) * d);
        for i in (0..d).filter(|i| i & m == 0) {
            let i1 = i | m;
            let p11 = data[c1 + i1];
            data[c0 + i] += p11 * eta;
            data[c1 + i1] = p11 * keep;
            data[c1 + i] *= coh;
            data[c0 + i1] *= coh;
        }
    }
}

pub fn apply_layer_noise(rho: &mut CMatrix, strengths: &[LayerStrength]) {
    for (q, s) in strengths.iter().enumerate() {
        apply_qubit_channel(rho, q, s);
    }
}

/// Noiseless application of a whole circuit.
pub fn apply_unitary_circuit(rho: &mut CMatrix, circuit: &Circuit) {
    for g in circuit.gates() {
        apply_gate(rho, g);
    }
}

/// One noisy pass over the circuit: each layer's gates, then noise on all qubits.
pub fn apply_noisy_circuit(rho: &mut CMatrix, circuit: &Circuit, strengths: &[LayerStrength]) {
    for layer in &circuit.layers {
        for g in layer {
            apply_gate(rho, g);
        }
        apply_layer_noise(rho, strengths);
    }
}

#[derive(Clone, Debug)]
pub struct SimRun {
    pub schedule: Schedule,
    pub steps: usize,
    /// logical-register initial state
    pub initial: CMatrix,
    /// logical-register observables
    pub observables: Vec<Observable>,
    /// per logical qubit
    pub strengths: Vec<LayerStrength>,
    pub tau: f64,
    pub positivity_every: usize,
    pub keep_states: bool,
}

impl SimRun {
    pub fn new(schedule: Schedule, steps: usize, initial: CMatrix, observables: Vec<Observable>, strengths: Vec<LayerStrength>, tau: f64) -> Self {
        SimRun { schedule, steps, initial, observables, strengths, tau, positivity_every: 10, keep_states: false }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        let n = self.schedule.n_physical();
        if n > MAX_SIM_QUBITS {
            return Err(Error::DimensionOverflow { dim: 1 << n, limit: 1 << MAX_SIM_QUBITS });
        }
        let nl = self.schedule.n_logical();
        if self.initial.nrows() != 1 << nl || self.initial.ncols() != 1 << nl {
            return invalid("initial state does not match the logical register");
        }
        if self.strengths.len() != nl {
            return invalid("one noise strength per logical qubit required");
        }
        if self.strengths.iter().any(|s| !(0.0..1.0).contains(&s.damping) || !(0.0..1.0).contains(&s.dephasing)) {
            return invalid("noise strengths must lie in [0, 1)");
        }
        if self.steps == 0 || !(self.tau > 0.0) {
            return invalid("steps and τ must be positive");
        }
        if self.observables.iter().any(|o| o.op.dim != 1 << nl) {
            return invalid("observable dimension differs from the logical register");
        }
        Ok(())
    }

    pub fn physical_strengths(&self) -> Vec<LayerStrength> {
        self.schedule.noise_source.iter().map(|&l| self.strengths[l].clone()).collect()
    }
}

/// Tensor |0⟩⟨0| onto every physical qubit outside the embedding.
pub fn embed_state(schedule: &Schedule, rho: &CMatrix) -> CMatrix {
    let n = schedule.n_physical();
    if is_identity_embedding(schedule) {
        return rho.clone();
    }
    let map = |i: usize| -> usize { schedule.embedding.iter().enumerate().map(|(l, &p)| ((i >> l) & 1) << p).sum() };
    let dl = rho.nrows();
    let mut out = CMatrix::zeros(1 << n, 1 << n);
    for j in 0..dl {
        for i in 0..dl {
            out[(map(i), map(j))] = rho[(i, j)];
        }
    }
    out
}

fn is_identity_embedding(schedule: &Schedule) -> bool {
    schedule.n_physical() == schedule.n_logical() && schedule.embedding.iter().enumerate().all(|(l, &p)| l == p)
}

/// Undoes the frame after k steps and traces out the auxiliary registers.
pub fn logical_state(schedule: &Schedule, rho: &CMatrix, k: usize) -> CMatrix {
    let mut r = rho.clone();
    let frame = schedule.frame(k);
    if frame.depth() > 0 {
        apply_unitary_circuit(&mut r, &frame.inverse());
    }
    if is_identity_embedding(schedule) {
        return r;
    }
    let nl = schedule.n_logical();
    let n = schedule.n_physical();
    let extra: Vec<usize> = (0..n).filter(|q| !schedule.embedding.contains(q)).collect();
    let map = |i: usize| -> usize { schedule.embedding.iter().enumerate().map(|(l, &p)| ((i >> l) & 1) << p).sum() };
    let spread = |e: usize| -> usize { extra.iter().enumerate().map(|(b, &p)| ((e >> b) & 1) << p).sum() };
    let dl = 1 << nl;
    let mut out = CMatrix::zeros(dl, dl);
    for e in 0..(1usize << extra.len()) {
        let off = spread(e);
        for j in 0..dl {
            for i in 0..dl {
                out[(i, j)] += r[(map(i) | off, map(j) | off)];
            }
        }
    }
    out
}

pub fn run(sim: &SimRun) -> Result<Trajectory> {
    sim.validate()?;
    let strengths = sim.physical_strengths();
    let names = sim.observables.iter().map(|o| o.name.clone()).collect();
    let mut traj = Trajectory::new(names);
    let mut states = Vec::new();
    let f0 = sim.schedule.frame(0);
    let mut rho = embed_state(&sim.schedule, &sim.initial);
    apply_unitary_circuit(&mut rho, f0);
    let mut diag = Diagnostics::default();
    let record = |rho: &CMatrix, k: usize, traj: &mut Trajectory, states: &mut Vec<CMatrix>| -> Result<()> {
        let logical = logical_state(&sim.schedule, rho, k);
        let row = sim.observables.iter().map(|o| o.expectation(&logical)).collect::<Result<Vec<f64>>>()?;
        traj.push(k as f64 * sim.tau, row);
        if sim.keep_states {
            states.push(logical);
        }
        Ok(())
    };
    diag.record(&rho, true, 1e-8)?;
    record(&rho, 0, &mut traj, &mut states)?;
    for k in 0..sim.steps {
        apply_noisy_circuit(&mut rho, sim.schedule.step(k), &strengths);
        linalg::hermitize(&mut rho);
        let check = sim.positivity_every > 0 && (k + 1) % sim.positivity_every == 0;
        diag.record(&rho, check, 1e-8).map_err(|e| Error::Invariant(format!("step {}: {e}", k + 1)))?;
        if diag.max_trace_error > 1e-10 {
            return Err(Error::Invariant(format!("step {}: trace drifted by {:.3e}", k + 1, diag.max_trace_error)));
        }
        record(&rho, k + 1, &mut traj, &mut states)?;
    }
    traj.diagnostics = diag;
    if sim.keep_states {
        traj.states = Some(states);
    }
    Ok(traj)
}

/// Superoperator (column-stacking) of one full schedule period.
pub fn period_superoperator(schedule: &Schedule, strengths_logical: &[LayerStrength]) -> Result<CMatrix> {
    let n = schedule.n_physical();
    let d = 1usize << n;
    if d * d > 4096 {
        return Err(Error::DimensionOverflow { dim: d * d, limit: 4096 });
    }
    let strengths: Vec<LayerStrength> = schedule.noise_source.iter().map(|&l| strengths_logical[l].clone()).collect();
    let mut s = CMatrix::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            let mut e = CMatrix::zeros(d, d);
            e[(i, j)] = ONE;
            for step in &schedule.steps {
                apply_noisy_circuit(&mut e, step, &strengths);
            }
            s.column_mut(j * d + i).copy_from(&linalg::vectorize(&e));
        }
    }
    Ok(s)
}

/// Unit-trace fixed point of a trace-preserving superoperator.
pub fn fixed_point(s: &CMatrix) -> Result<CMatrix> {
    let n2 = s.nrows();
    let d = (n2 as f64).sqrt().round() as usize;
    let mut a = s - CMatrix::identity(n2, n2);
    let mut rhs = DVector::from_element(n2, ZERO);
    for j in 0..n2 {
        a[(0, j)] = if j % (d + 1) == 0 { ONE } else { ZERO };
    }
    rhs[0] = ONE;
    let sol = a.lu().solve(&rhs).ok_or_else(|| Error::NonConvergence("fixed-point system is singular".into()))?;
    let mut rho = linalg::unvectorize(&sol, d);
    linalg::hermitize(&mut rho);
    Ok(rho)
}

/// Periodic steady state of the schedule on the logical register, averaged
/// over the phases of the period (what a long per-step series averages to),
/// with the residual ‖S[ρ] − ρ‖_max of the physical fixed point.
pub fn steady_state(schedule: &Schedule, strengths: &[LayerStrength]) -> Result<(CMatrix, f64)> {
    schedule.validate()?;
    let s = period_superoperator(schedule, strengths)?;
    let rho = fixed_point(&s)?;
    let v = linalg::vectorize(&rho);
    let res = (&s * &v - &v).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if !linalg::is_psd_within(&rho, 1e-8) {
        return Err(Error::Invariant(format!("steady state has eigenvalue {:.3e}", linalg::min_eigenvalue(&rho))));
    }
    let physical: Vec<LayerStrength> = schedule.noise_source.iter().map(|&l| strengths[l].clone()).collect();
    let mut phase = rho.clone();
    let mut avg = logical_state(schedule, &phase, 0);
    for k in 1..schedule.period() {
        apply_noisy_circuit(&mut phase, schedule.step(k - 1), &physical);
        avg += logical_state(schedule, &phase, k);
    }
    avg /= C64::new(schedule.period() as f64, 0.0);
    Ok((avg, res))
}

/// Exact Lindblad propagator of one qubit with D[σ₋] at γ and D[σ_z] at Γ/2
/// applied for time t, for cross-checks.
pub fn single_qubit_lindblad(rho: &CMatrix, damping: f64, dephasing: f64, t: f64) -> CMatrix {
    let l = linalg::dissipator_superop(&linalg::sigma_minus(), damping) + linalg::dissipator_superop(&linalg::sigma_z(), dephasing / 2.0);
    let prop = linalg::expm(&(l * C64::new(t, 0.0)));
    linalg::unvectorize(&(prop * linalg::vectorize(rho)), 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{symmetrize, trotter_step, GateKind, Role};
    use crate::coarse_grain::LorentzianBath;
    use crate::linalg::c;
    use crate::spin_model::{bosons_to_spins, Decomposition, NoiseProfile, SystemSpec, TrotterPlan};
    use proptest::prelude::*;

    fn strength(p_g: f64, p_d: f64) -> LayerStrength {
        LayerStrength { damping: p_g, dephasing: p_d }
    }

    fn random_state(n: usize, seed: u64) -> CMatrix {
        let d = 1 << n;
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = CMatrix::from_fn(d, d, |_, _| c(next(), next()));
        let r = &a * a.adjoint();
        let tr = linalg::trace(&r);
        r / tr
    }

    #[test]
    fn x_flips_ground_state() {
        let mut rho = linalg::ground_projector();
        apply_gate(&mut rho, &Gate::one(GateKind::X, 0));
        assert_eq!(rho, linalg::excited_projector());
    }

    #[test]
    fn ms_pi_moves_population_to_11() {
        let mut rho = CMatrix::zeros(4, 4);
        rho[(0, 0)] = ONE;
        apply_gate(&mut rho, &Gate::two(GateKind::MS(std::f64::consts::PI), 0, 1));
        assert!((rho[(3, 3)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn channel_closed_forms() {
        let mut rho = linalg::excited_projector();
        let s = strength(0.03, 0.0);
        for _ in 0..50 {
            apply_qubit_channel(&mut rho, 0, &s);
        }
        assert!((rho[(1, 1)].re - (-50.0 * 0.03f64).exp()).abs() < 1e-14);
        let mut plus = CMatrix::from_element(2, 2, c(0.5, 0.0));
        let s = strength(0.0, 0.02);
        for _ in 0..40 {
            apply_qubit_channel(&mut plus, 0, &s);
        }
        assert!((plus[(0, 1)].norm() - 0.5 * (-40.0 * 0.02f64).exp()).abs() < 1e-15);
        let mut id = random_state(2, 3);
        let before = id.clone();
        apply_layer_noise(&mut id, &[strength(0.0, 0.0), strength(0.0, 0.0)]);
        assert_eq!(id, before);
    }

    #[test]
    fn channel_equals_lindblad_propagator() {
        let rho = random_state(1, 7);
        let (g, gd, tg, m) = (0.7, 0.3, 0.01, 25);
        let mut r = rho.clone();
        for _ in 0..m {
            apply_qubit_channel(&mut r, 0, &strength(g * tg, gd * tg));
        }
        let exact = single_qubit_lindblad(&rho, g, gd, m as f64 * tg);
        assert!(linalg::max_abs_diff(&r, &exact) < 1e-12);
    }

    #[test]
    fn channel_acts_on_the_right_qubit() {
        let rho = random_state(3, 11);
        let mut r = rho.clone();
        apply_qubit_channel(&mut r, 1, &strength(0.2, 0.1));
        let l = linalg::dissipator_superop(&linalg::embed_qubits(&linalg::sigma_minus(), &[1], 3), 1.0)
            + linalg::dissipator_superop(&linalg::embed_qubits(&linalg::sigma_z(), &[1], 3), 0.25);
        let exact = linalg::unvectorize(&(linalg::expm(&(l * c(0.2, 0.0))) * linalg::vectorize(&rho)), 8);
        // damping then dephasing commute for these two channels
        assert!(linalg::max_abs_diff(&r, &exact) < 1e-12);
    }

    fn small_model(n_q: usize) -> crate::spin_model::SpinBathModel {
        let modes: Vec<(f64, f64, f64)> = (0..n_q).map(|i| (0.5, 1.0 + 0.2 * i as f64, 0.5)).collect();
        let noise = NoiseProfile { dephasing_ratio: 0.5, system: crate::spin_model::SystemNoise::Noiseless };
        bosons_to_spins(&LorentzianBath::single(&modes), &vec![1; n_q], &SystemSpec::single(0.9), &noise).unwrap()
    }

    fn sx(n: usize) -> Observable {
        Observable::on_qubits("sx", &linalg::sigma_x(), &[0], n).unwrap()
    }

    fn plus_ground(n: usize) -> CMatrix {
        let mut rho = CMatrix::zeros(1 << n, 1 << n);
        for i in 0..2 {
            for j in 0..2 {
                rho[(i, j)] = c(0.5, 0.0);
            }
        }
        rho
    }

    #[test]
    fn noiseless_trotter_converges_to_exact() {
        let m = small_model(2);
        let h = m.hamiltonian_dense().unwrap();
        let t_end = 2.0;
        let exact = {
            let u = linalg::expm(&(&h * c(0.0, -t_end)));
            let r = &u * plus_ground(3) * u.adjoint();
            sx(3).expectation(&r).unwrap()
        };
        let mut errs = Vec::new();
        for steps in [20, 40, 80] {
            let tau = t_end / steps as f64;
            let plan = TrotterPlan::with_tau(&m, Decomposition::NativeMS, 3, tau, steps).unwrap();
            let sched = Schedule::plain(trotter_step(&m, &plan).unwrap());
            let run_ = SimRun::new(sched, steps, plus_ground(3), vec![sx(3)], vec![strength(0.0, 0.0); 3], tau);
            let traj = run(&run_).unwrap();
            errs.push((traj.values.last().unwrap()[0] - exact).abs());
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!((order1 - 1.0).abs() < 0.2 && (order2 - 1.0).abs() < 0.2, "{errs:?}");
    }

    #[test]
    fn idle_system_decays_per_layer() {
        let m = small_model(2);
        let plan = TrotterPlan::with_tau(&m, Decomposition::CnotB, 7, 0.1, 5).unwrap();
        let mut sched = Schedule::plain(trotter_step(&m, &plan).unwrap());
        // replace every gate by nothing: pure idling
        for l in sched.steps[0].layers.iter_mut() {
            l.clear();
        }
        let d = sched.steps[0].depth();
        let mut init = CMatrix::zeros(8, 8);
        init[(1, 1)] = ONE;
        let n_obs = Observable::on_qubits("n", &linalg::excited_projector(), &[0], 3).unwrap();
        let p = 0.004;
        let sim = SimRun::new(sched, 5, init, vec![n_obs], vec![strength(p, 0.0), strength(0.01, 0.0), strength(0.01, 0.0)], 0.1);
        let traj = run(&sim).unwrap();
        for (k, row) in traj.values.iter().enumerate() {
            assert!((row[0] - (-((k * d) as f64) * p).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn symmetrized_noiseless_matches_plain_on_even_steps() {
        let m = small_model(2);
        let plan = TrotterPlan::with_tau(&m, Decomposition::NativeMS, 3, 0.15, 6).unwrap();
        let plain = Schedule::plain(trotter_step(&m, &plan).unwrap());
        let sym = symmetrize(&m, &plan).unwrap();
        let sz = Observable::on_qubits("sz", &linalg::sigma_z(), &[0], 3).unwrap();
        let mut init = CMatrix::zeros(8, 8);
        init[(1, 1)] = ONE;
        let zero = vec![strength(0.0, 0.0); 3];
        let a = run(&SimRun::new(plain, 6, init.clone(), vec![sz.clone(), sx(3)], zero.clone(), 0.15)).unwrap();
        let b = run(&SimRun::new(sym, 6, init, vec![sz, sx(3)], zero, 0.15)).unwrap();
        for k in (0..=6).step_by(2) {
            assert!((a.values[k][0] - b.values[k][0]).abs() < 1e-10);
        }
        // the frame bookkeeping makes odd steps agree as well
        for k in 0..=6 {
            assert!((a.values[k][1] - b.values[k][1]).abs() < 1e-10);
        }
    }

    #[test]
    fn runs_are_deterministic_and_cptp() {
        let m = small_model(2);
        let plan = TrotterPlan::new(&m, Decomposition::ControlZ, 11, 0.02, 30).unwrap();
        let sched = Schedule::plain(trotter_step(&m, &plan).unwrap());
        let sim = SimRun::new(sched, 30, plus_ground(3), vec![sx(3)], plan.strengths.clone(), plan.tau);
        let a = run(&sim).unwrap();
        let b = run(&sim).unwrap();
        assert_eq!(a.values, b.values);
        assert!(a.diagnostics.max_trace_error < 1e-10);
        assert_eq!(a.diagnostics.positivity_checks, 4);
    }

    #[test]
    fn steady_state_is_fixed_point() {
        let m = small_model(1);
        let plan = TrotterPlan::new(&m, Decomposition::NativeMS, 2, 0.05, 1).unwrap();
        let sched = Schedule::plain(trotter_step(&m, &plan).unwrap());
        let mut strengths = plan.strengths.clone();
        strengths[0] = strength(0.01, 0.0);
        let (rho, res) = steady_state(&sched, &strengths).unwrap();
        assert!(res < 1e-12);
        assert!((linalg::trace(&rho).re - 1.0).abs() < 1e-12);
        let mut r = rho.clone();
        apply_noisy_circuit(&mut r, &sched.steps[0], &strengths);
        assert!(linalg::max_abs_diff(&r, &rho) < 1e-10);
    }

    #[test]
    fn symmetrized_steady_state_is_the_long_run_average() {
        let m = small_model(1);
        let plan = TrotterPlan::new(&m, Decomposition::NativeMS, 2, 0.05, 1).unwrap();
        let sched = symmetrize(&m, &plan).unwrap();
        let strengths = vec![strength(0.08, 0.0), strength(0.04, 0.0)];
        let (rho, _) = steady_state(&sched, &strengths).unwrap();
        let n_obs = Observable::on_qubits("n", &linalg::excited_projector(), &[0], 2).unwrap();
        let steps = 600;
        let traj = run(&SimRun::new(sched, steps, plus_ground(2), vec![n_obs.clone()], strengths, plan.tau)).unwrap();
        let (even, odd) = (traj.values[steps][0], traj.values[steps - 1][0]);
        // the two phases differ at first order in the system flip probability
        assert!((even - odd).abs() > 1e-3);
        assert!((n_obs.expectation(&rho).unwrap() - 0.5 * (even + odd)).abs() < 1e-9);
    }

    #[test]
    fn embedding_and_reduction_roundtrip() {
        let roles = vec![Role::System, Role::System, Role::Bath];
        let step = Circuit::new(roles.clone());
        let sched = Schedule {
            steps: vec![step.clone()],
            frames: vec![step],
            embedding: vec![0, 2],
            noise_source: vec![0, 0, 1],
        };
        let rho = random_state(2, 5);
        let phys = embed_state(&sched, &rho);
        assert_eq!(phys.nrows(), 8);
        let back = logical_state(&sched, &phys, 0);
        assert!(linalg::max_abs_diff(&back, &rho) < 1e-15);
    }

    proptest! {
        #[test]
        fn gates_and_noise_preserve_trace(theta in -3.0f64..3.0, pg in 0.0f64..0.3, pd in 0.0f64..0.3, seed in 0u64..1000) {
            let mut rho = random_state(3, seed);
            for g in [Gate::two(GateKind::MS(theta), 0, 2), Gate::two(GateKind::ISwap(theta), 1, 0), Gate::one(GateKind::Ry(theta), 2), Gate::two(GateKind::CNOT, 2, 1)] {
                apply_gate(&mut rho, &g);
                prop_assert!((linalg::trace(&rho).re - 1.0).abs() < 1e-13);
                prop_assert!(linalg::hermiticity_error(&rho) < 1e-13);
            }
            apply_layer_noise(&mut rho, &[strength(pg, pd), strength(pd, pg), strength(pg, 0.0)]);
            prop_assert!((linalg::trace(&rho).re - 1.0).abs() < 1e-13);
            prop_assert!(linalg::min_eigenvalue(&rho) > -1e-12);
        }
    }
}
