//! Effective Lindbladian of a noisy Trotter step: every per-layer noise
//! operator is carried to the end of the step by the gates that follow it.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GateKind, Role};
use crate::error::{invalid, Error, Result};
use crate::lindblad::partial_trace_keep_low;
use crate::linalg::{self, c, CMatrix, ONE, ZERO};
use crate::noisy_sim;
use crate::spin_model::LayerStrength;

pub const MAX_EFFECTIVE_QUBITS: usize = 7;
pub const MERGE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Damping,
    Dephasing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub layer: usize,
    pub qubit: usize,
    pub kind: NoiseKind,
}

#[derive(Clone, Debug)]
pub struct NoiseOperatorTerm {
    pub op: CMatrix,
    /// dimensionless contributions are weight·τ
    pub weight: f64,
    pub origins: Vec<(Origin, f64)>,
}

#[derive(Clone, Debug)]
pub struct EffectiveLindblad {
    pub n_qubits: usize,
    pub tau: f64,
    pub terms: Vec<NoiseOperatorTerm>,
    /// Σ strengths over layers and qubits exceeded the first-order guard
    pub guard_exceeded: bool,
}

/// U_suffix · op · U_suffix† for the given layers.
pub fn conjugate_through(layers: &[Vec<crate::circuit::Gate>], op: &CMatrix) -> CMatrix {
    let mut m = op.clone();
    for g in layers.iter().flatten() {
        linalg::conjugate_local(&mut m, &g.kind.matrix(), &g.qubits);
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableGate {
    Cnot,
    Cz,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableOp {
    Minus,
    Plus,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wire {
    Control,
    Target,
}

/// Entries of the two-qubit noise-transformation table as 4×4 matrices
/// (control on local bit 0), with a readable label.
pub fn table_transform(gate: TableGate, op: TableOp, wire: Wire) -> (CMatrix, &'static str) {
    let k = |a: &CMatrix, b: &CMatrix| linalg::kron(b, a);
    let id = linalg::identity(2);
    let (sm, sp, sz, sx) = (linalg::sigma_minus(), linalg::sigma_plus(), linalg::sigma_z(), linalg::sigma_x());
    let p0 = linalg::ground_projector();
    let p1 = linalg::excited_projector();
    let local = match op {
        TableOp::Minus => &sm,
        TableOp::Plus => &sp,
        TableOp::Z => &sz,
    };
    match (gate, wire, op) {
        (TableGate::Cnot, Wire::Control, TableOp::Z) => (k(&sz, &id), "σz^c"),
        (TableGate::Cnot, Wire::Control, _) => (k(local, &sx), if op == TableOp::Minus { "σ₋^c σx^t" } else { "σ₊^c σx^t" }),
        (TableGate::Cnot, Wire::Target, TableOp::Minus) => (k(&p0, &sm) + k(&p1, &sp), "P₀σ₋^t + P₁σ₊^t"),
        (TableGate::Cnot, Wire::Target, TableOp::Plus) => (k(&p0, &sp) + k(&p1, &sm), "P₀σ₊^t + P₁σ₋^t"),
        (TableGate::Cnot, Wire::Target, TableOp::Z) => (k(&sz, &sz), "σz^c σz^t"),
        (TableGate::Cz, Wire::Control, TableOp::Z) => (k(&sz, &id), "σz^c"),
        (TableGate::Cz, Wire::Control, _) => (k(local, &sz), if op == TableOp::Minus { "σ₋^c σz^t" } else { "σ₊^c σz^t" }),
        (TableGate::Cz, Wire::Target, TableOp::Z) => (k(&id, &sz), "σz^t"),
        (TableGate::Cz, Wire::Target, _) => (k(&sz, local), if op == TableOp::Minus { "σ₋^t σz^c" } else { "σ₊^t σz^c" }),
    }
}

/// The incoming operator of a table entry, on the same 4×4 space.
pub fn table_input(op: TableOp, wire: Wire) -> CMatrix {
    let local = match op {
        TableOp::Minus => linalg::sigma_minus(),
        TableOp::Plus => linalg::sigma_plus(),
        TableOp::Z => linalg::sigma_z(),
    };
    let q = if wire == Wire::Control { 0 } else { 1 };
    linalg::embed_qubits(&local, &[q], 2)
}

/// Worst deviation over all twelve entries between the table and explicit conjugation.
pub fn table_check() -> f64 {
    let mut worst: f64 = 0.0;
    for gate in [TableGate::Cnot, TableGate::Cz] {
        let kind = if gate == TableGate::Cnot { GateKind::CNOT } else { GateKind::CZ };
        let layers = vec![vec![crate::circuit::Gate::two(kind, 0, 1)]];
        for op in [TableOp::Minus, TableOp::Plus, TableOp::Z] {
            for wire in [Wire::Control, Wire::Target] {
                let got = conjugate_through(&layers, &table_input(op, wire));
                worst = worst.max(linalg::max_abs_diff(&got, &table_transform(gate, op, wire).0));
            }
        }
    }
    worst
}

/// Damping on qubit q after layer j becomes σ₋^q carried through the later
/// layers with weight p_γ/τ; dephasing becomes σ_z^q/√2 with weight p_Γ/τ
/// (so that it equals D[σ_z] at Γ/2).
pub fn effective_lindblad(step: &Circuit, strengths: &[LayerStrength], tau: f64) -> Result<EffectiveLindblad> {
    let n = step.n_qubits;
    if n > MAX_EFFECTIVE_QUBITS {
        return Err(Error::DimensionOverflow { dim: 1 << n, limit: 1 << MAX_EFFECTIVE_QUBITS });
    }
    if strengths.len() != n || !(tau > 0.0) {
        return invalid("one strength per qubit and τ > 0 required");
    }
    step.validate()?;
    let total: f64 = strengths.iter().map(|s| s.damping + s.dephasing).sum::<f64>() * step.depth() as f64;
    let mut raw: Vec<(CMatrix, f64, Origin)> = Vec::new();
    let inv_sqrt2 = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for j in 0..step.depth() {
        let suffix = &step.layers[j + 1..];
        for (q, s) in strengths.iter().enumerate() {
            if s.damping > 0.0 {
                let op = conjugate_through(suffix, &linalg::embed_qubits(&linalg::sigma_minus(), &[q], n));
                raw.push((op, s.damping / tau, Origin { layer: j, qubit: q, kind: NoiseKind::Damping }));
            }
            if s.dephasing > 0.0 {
                let op = conjugate_through(suffix, &(linalg::embed_qubits(&linalg::sigma_z(), &[q], n) * inv_sqrt2));
                raw.push((op, s.dephasing / tau, Origin { layer: j, qubit: q, kind: NoiseKind::Dephasing }));
            }
        }
    }
    let mut terms: Vec<NoiseOperatorTerm> = Vec::new();
    for (op, w, o) in raw {
        match terms.iter_mut().find(|t| linalg::phase_aligned_diff(&op, &t.op) < MERGE_TOL) {
            Some(t) => {
                t.weight += w;
                t.origins.push((o, w));
            }
            None => terms.push(NoiseOperatorTerm { op, weight: w, origins: vec![(o, w)] }),
        }
    }
    Ok(EffectiveLindblad { n_qubits: n, tau, terms, guard_exceeded: total >= 0.5 })
}

impl EffectiveLindblad {
    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// Summed weights whose physical origin is qubit q: (damping, dephasing).
    pub fn rates_by_origin(&self, q: usize) -> (f64, f64) {
        let mut out = (0.0, 0.0);
        for t in &self.terms {
            for (o, w) in &t.origins {
                if o.qubit == q {
                    match o.kind {
                        NoiseKind::Damping => out.0 += w,
                        NoiseKind::Dephasing => out.1 += w,
                    }
                }
            }
        }
        out
    }

    /// Dissipative generator as a dense superoperator.
    pub fn superoperator(&self) -> CMatrix {
        let d = 1 << self.n_qubits;
        let mut s = CMatrix::zeros(d * d, d * d);
        for t in &self.terms {
            s += linalg::dissipator_superop(&t.op, t.weight);
        }
        s
    }

    /// Applies the dissipator to a matrix.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        for t in &self.terms {
            let l = &t.op;
            let ld = l.adjoint();
            let ldl = &ld * l;
            out += (l * rho * &ld - (&ldl * rho + rho * &ldl) * c(0.5, 0.0)) * c(t.weight, 0.0);
        }
        out
    }

    /// Generator reduced to the system qubits with every bath qubit held in
    /// |0⟩: X ↦ Tr_b 𝓛(X ⊗ |0⟩⟨0|). System qubits are the low `n_s` qubits.
    pub fn system_generator(&self, n_s: usize) -> CMatrix {
        let ds = 1 << n_s;
        let d = 1 << self.n_qubits;
        let dims = [ds, d / ds];
        let mut s = CMatrix::zeros(ds * ds, ds * ds);
        for j in 0..ds {
            for i in 0..ds {
                let mut e = CMatrix::zeros(d, d);
                e[(i, j)] = ONE;
                let red = partial_trace_keep_low(&self.apply(&e), &dims, 1);
                s.column_mut(j * ds + i).copy_from(&linalg::vectorize(&red));
            }
        }
        s
    }

    /// Coefficient of D[σ_z] on a single system qubit after noise factoring.
    pub fn system_dephasing_weight(&self) -> f64 {
        pauli_chi(&self.system_generator(1))[(3, 3)].re
    }

    /// Γ̄_eff in the convention σ_z at Γ/2.
    pub fn system_dephasing_rate(&self) -> f64 {
        2.0 * self.system_dephasing_weight()
    }

    pub fn is_completely_positive(&self, tol: f64) -> bool {
        let d = 1 << self.n_qubits;
        let prop = linalg::expm(&(self.superoperator() * c(self.tau, 0.0)));
        linalg::min_eigenvalue(&linalg::choi_of_superop(&prop, d)) >= -tol
    }

    pub fn export(&self) -> Vec<TermExport> {
        self.terms
            .iter()
            .map(|t| TermExport {
                operator: pauli_label(&t.op, self.n_qubits),
                weight: t.weight,
                origins: t.origins.iter().map(|(o, w)| (o.layer, o.qubit, o.kind, *w)).collect(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermExport {
    pub operator: String,
    pub weight: f64,
    pub origins: Vec<(usize, usize, NoiseKind, f64)>,
}

/// χ matrix of a single-qubit superoperator in the basis (I, X, Y, Z):
/// S(ρ) = Σ χ_ab P_a ρ P_b.
pub fn pauli_chi(s: &CMatrix) -> CMatrix {
    let p = [linalg::identity(2), linalg::sigma_x(), linalg::sigma_y(), linalg::sigma_z()];
    let mut chi = CMatrix::zeros(4, 4);
    for a in 0..4 {
        for b in 0..4 {
            let basis = linalg::superop_sandwich(&p[a], &p[b]);
            let mut acc = ZERO;
            for (x, y) in basis.iter().zip(s.iter()) {
                acc += x.conj() * y;
            }
            chi[(a, b)] = acc / 4.0;
        }
    }
    chi
}

/// Pauli-string expansion, e.g. `0.5*ZX + 0.5i*ZY` (qubit 0 rightmost).
pub fn pauli_label(op: &CMatrix, n: usize) -> String {
    let d = 1usize << n;
    let mut parts = Vec::new();
    for code in 0..(1usize << (2 * n)) {
        // monomial Pauli string: P|k⟩ = phase·|k ^ xmask⟩
        let mut xmask = 0;
        let mut zmask = 0;
        let mut ymask = 0;
        let mut name = String::new();
        for q in (0..n).rev() {
            let p = (code >> (2 * q)) & 3;
            name.push(['I', 'X', 'Y', 'Z'][p]);
            match p {
                1 => xmask |= 1 << q,
                2 => {
                    xmask |= 1 << q;
                    zmask |= 1 << q;
                    ymask |= 1 << q;
                }
                3 => zmask |= 1 << q,
                _ => {}
            }
        }
        // Tr(P† op)/d with P|k⟩ = i^{#Y} (−1)^{popcount(k & zmask)} |k ^ xmask⟩
        let ny = (ymask as usize).count_ones();
        let iy = [ONE, c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)][(ny % 4) as usize];
        let mut acc = ZERO;
        for k in 0..d {
            let sign = if (k & zmask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            acc += op[(k ^ xmask, k)] * sign;
        }
        let coef = acc * iy.conj() / d as f64;
        if coef.norm() > 1e-12 {
            parts.push(format!("({:.6}{:+.6}i)*{}", coef.re, coef.im, name));
        }
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

/// Superoperator of one noisy pass over the step.
pub fn noisy_step_superoperator(step: &Circuit, strengths: &[LayerStrength]) -> Result<CMatrix> {
    let d = 1usize << step.n_qubits;
    if d * d > 1024 {
        return Err(Error::DimensionOverflow { dim: d * d, limit: 1024 });
    }
    let mut s = CMatrix::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            let mut e = CMatrix::zeros(d, d);
            e[(i, j)] = ONE;
            noisy_sim::apply_noisy_circuit(&mut e, step, strengths);
            s.column_mut(j * d + i).copy_from(&linalg::vectorize(&e));
        }
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderReport {
    pub gate_error: f64,
    /// ‖S_noisy − exp(τL_eff)∘𝒰_step‖_max
    pub deviation: f64,
    /// ‖𝒰_step − exp(−iτ[H, ·])‖_max, independent of the noise
    pub trotter_mismatch: f64,
}

/// Compares one noisy step with the effective model exp(τL_eff)∘𝒰_step.
pub fn verify_first_order(step: &Circuit, strengths: &[LayerStrength], tau: f64, hamiltonian: Option<&CMatrix>) -> Result<FirstOrderReport> {
    let d = 1usize << step.n_qubits;
    let noisy = noisy_step_superoperator(step, strengths)?;
    let zero = vec![LayerStrength { damping: 0.0, dephasing: 0.0 }; strengths.len()];
    let ideal = noisy_step_superoperator(step, &zero)?;
    let leff = effective_lindblad(step, strengths, tau)?;
    let model = linalg::expm(&(leff.superoperator() * c(tau, 0.0))) * &ideal;
    let trotter_mismatch = match hamiltonian {
        Some(h) => {
            if h.nrows() != d {
                return invalid("Hamiltonian dimension mismatch");
            }
            let exact = linalg::expm(&(linalg::hamiltonian_superop(h) * c(tau, 0.0)));
            linalg::max_abs_diff(&exact, &ideal)
        }
        None => 0.0,
    };
    let gate_error = strengths.iter().map(|s| s.damping + 2.0 * s.dephasing).fold(0.0, f64::max);
    Ok(FirstOrderReport { gate_error, deviation: linalg::max_abs_diff(&noisy, &model), trotter_mismatch })
}

/// Deviation at the given strengths and at half of them, with their ratio.
pub fn first_order_scaling(step: &Circuit, strengths: &[LayerStrength], tau: f64) -> Result<(f64, f64, f64)> {
    let half: Vec<LayerStrength> = strengths.iter().map(|s| LayerStrength { damping: s.damping / 2.0, dephasing: s.dephasing / 2.0 }).collect();
    let a = verify_first_order(step, strengths, tau, None)?.deviation;
    let b = verify_first_order(step, &half, tau, None)?.deviation;
    Ok((a, b, a / b))
}

/// Qubit indices of a role in the step.
pub fn qubits_with_role(step: &Circuit, role: Role) -> Vec<usize> {
    step.roles.iter().enumerate().filter(|(_, r)| **r == role).map(|(q, _)| q).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{trotter_step, Gate};
    use crate::coarse_grain::LorentzianBath;
    use crate::spin_model::{bosons_to_spins, Decomposition, NoiseProfile, SpinBathModel, SystemNoise, SystemSpec, TrotterPlan};
    use proptest::prelude::*;

    fn model(n_q: usize) -> SpinBathModel {
        let modes: Vec<(f64, f64, f64)> = (0..n_q).map(|i| (1.0 / (n_q as f64).sqrt(), 1.0 + 0.1 * i as f64, 0.5)).collect();
        let noise = NoiseProfile { dephasing_ratio: 0.5, system: SystemNoise::Noiseless };
        bosons_to_spins(&LorentzianBath::single(&modes), &vec![1; n_q], &SystemSpec::single(0.9), &noise).unwrap()
    }

    #[test]
    fn table_entries_match_conjugation() {
        assert!(table_check() < 1e-12);
        let (m, label) = table_transform(TableGate::Cnot, TableOp::Plus, Wire::Control);
        assert_eq!(label, "σ₊^c σx^t");
        assert_eq!(m, linalg::kron(&linalg::sigma_x(), &linalg::sigma_plus()));
    }

    #[test]
    fn conjugation_examples() {
        assert_eq!(conjugate_through(&[], &linalg::sigma_x()), linalg::sigma_x());
        let cnot = vec![vec![Gate::two(GateKind::CNOT, 0, 1)]];
        let sm = linalg::embed_qubits(&linalg::sigma_minus(), &[0], 2);
        let expect = linalg::kron(&linalg::sigma_x(), &linalg::sigma_minus());
        assert!(linalg::max_abs_diff(&conjugate_through(&cnot, &sm), &expect) < 1e-15);
    }

    #[test]
    fn native_ms_weights_reproduce_qubit_rates() {
        let m = model(2);
        let plan = TrotterPlan::new(&m, Decomposition::NativeMS, 3, 0.01, 1).unwrap();
        let step = trotter_step(&m, &plan).unwrap();
        let leff = effective_lindblad(&step, &plan.strengths, plan.tau).unwrap();
        for (q, r) in m.rates.iter().enumerate() {
            let (g, gd) = leff.rates_by_origin(q);
            assert!((g - r.damping).abs() <= 1e-12 * r.damping.max(1.0));
            assert!((gd - r.dephasing).abs() <= 1e-12 * r.dephasing.max(1.0));
        }
        let expected: f64 = plan.strengths.iter().map(|s| s.damping + s.dephasing).sum::<f64>() * 3.0 / plan.tau;
        assert!((leff.total_weight() - expected).abs() < 1e-12 * expected);
        assert!(leff.is_completely_positive(1e-8));
    }

    #[test]
    fn conjugation_preserves_norm() {
        let m = model(2);
        let plan = TrotterPlan::new(&m, Decomposition::ControlZ, 11, 0.01, 1).unwrap();
        let step = trotter_step(&m, &plan).unwrap();
        let leff = effective_lindblad(&step, &plan.strengths, plan.tau).unwrap();
        for t in &leff.terms {
            let fro = t.op.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            // both σ₋^q and σ_z^q/√2 have Frobenius norm √(d/2) before conjugation
            assert!((fro - 2.0).abs() < 1e-12, "{fro}");
        }
    }

    #[test]
    fn cnot_s_dephases_the_system_and_cnot_b_does_not() {
        let m = model(2);
        let b = {
            let plan = TrotterPlan::new(&m, Decomposition::CnotB, 7, 0.0036, 1).unwrap();
            effective_lindblad(&trotter_step(&m, &plan).unwrap(), &plan.strengths, plan.tau).unwrap()
        };
        let s = {
            let plan = TrotterPlan::new(&m, Decomposition::CnotS, 7, 0.0036, 1).unwrap();
            effective_lindblad(&trotter_step(&m, &plan).unwrap(), &plan.strengths, plan.tau).unwrap()
        };
        let scale = m.rates[1].damping;
        assert!(s.system_dephasing_weight() > 1e-2 * scale);
        assert!(b.system_dephasing_weight().abs() < 1e-2 * scale);
    }

    #[test]
    fn pauli_labels() {
        assert_eq!(pauli_label(&linalg::sigma_z(), 1), "(1.000000+0.000000i)*Z");
        let zx = linalg::kron(&linalg::sigma_z(), &linalg::sigma_x());
        assert_eq!(pauli_label(&zx, 2), "(1.000000+0.000000i)*ZX");
        let sm = pauli_label(&linalg::sigma_minus(), 1);
        assert!(sm.contains("*X") && sm.contains("*Y"));
    }

    #[test]
    fn chi_of_dephasing() {
        let s = linalg::dissipator_superop(&linalg::sigma_z(), 0.3);
        let chi = pauli_chi(&s);
        assert!((chi[(3, 3)].re - 0.3).abs() < 1e-15);
        assert!((chi[(0, 0)].re + 0.3).abs() < 1e-15);
    }

    #[test]
    fn first_order_deviation_is_quadratic() {
        let m = model(2);
        for d in Decomposition::ALL {
            let plan = TrotterPlan::with_tau(&m, d, 1, 0.18, 1).unwrap();
            let step = trotter_step(&m, &plan).unwrap();
            let eps = 0.01;
            let strengths: Vec<LayerStrength> = m.rates.iter().map(|r| LayerStrength { damping: eps * r.damping / 0.5, dephasing: eps * r.dephasing / 0.5 }).collect();
            let (_, _, ratio) = first_order_scaling(&step, &strengths, plan.tau).unwrap();
            assert!(ratio > 4.0 / 1.5 && ratio < 4.0 * 1.5, "{d:?}: {ratio}");
        }
        let plan = TrotterPlan::with_tau(&m, Decomposition::NativeMS, 1, 0.18, 1).unwrap();
        let step = trotter_step(&m, &plan).unwrap();
        let zero = vec![LayerStrength { damping: 0.0, dephasing: 0.0 }; 3];
        let h = m.hamiltonian_dense().unwrap();
        let r = verify_first_order(&step, &zero, plan.tau, Some(&h)).unwrap();
        assert_eq!(r.deviation, 0.0);
        assert!(r.trotter_mismatch > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn weight_is_conserved(eps in 0.001f64..0.05, di in 0usize..5) {
            let m = model(2);
            let plan = TrotterPlan::new(&m, Decomposition::ALL[di], 5, eps, 1).unwrap();
            let step = trotter_step(&m, &plan).unwrap();
            let leff = effective_lindblad(&step, &plan.strengths, plan.tau).unwrap();
            let expected: f64 = plan.strengths.iter().map(|s| s.damping + s.dephasing).sum::<f64>() * step.depth() as f64 / plan.tau;
            prop_assert!((leff.total_weight() - expected).abs() <= 1e-12 * expected);
        }
    }
}
