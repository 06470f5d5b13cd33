//! Qubit-level model: each pseudo-mode becomes N auxiliary spins whose
//! hardware noise supplies the mode broadening, and the Trotter step is chosen
//! so that per-gate noise integrates to exactly those rates.

use serde::{Deserialize, Serialize};

use crate::coarse_grain::LorentzianBath;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, C64, CMatrix, SparseOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn matrix(self) -> CMatrix {
        match self {
            Axis::X => linalg::sigma_x(),
            Axis::Y => linalg::sigma_y(),
            Axis::Z => linalg::sigma_z(),
        }
    }
}

/// How an auxiliary spin couples to a system spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "axis", rename_all = "snake_case")]
pub enum Interaction {
    /// ½ σ_a^sys ⊗ (c σ₋ + c* σ₊)
    Axis(Axis),
    /// (c/√2)(σ₊^sys σ₋ + σ₋^sys σ₊)
    Exchange,
    /// (c/√2)(σ₊^sys σ₊ + σ₋^sys σ₋)
    PairCreation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hopping {
    pub i: usize,
    pub j: usize,
    /// Δ_ij in ½(Δ_ij σ₊^i σ₋^j + h.c.)
    pub value: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    /// Δ_ii in −(Δ_ii/2)σ_z^i
    pub splittings: Vec<f64>,
    pub hoppings: Vec<Hopping>,
    /// coupling axis used by [`bosons_to_spins`]
    pub axis: Axis,
}

impl SystemSpec {
    pub fn single(delta: f64) -> Self {
        SystemSpec { splittings: vec![delta], hoppings: Vec::new(), axis: Axis::X }
    }

    pub fn n_s(&self) -> usize {
        self.splittings.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.splittings.is_empty() || self.splittings.iter().any(|d| !d.is_finite()) {
            return invalid("at least one finite system splitting required");
        }
        for h in &self.hoppings {
            if h.i >= h.j || h.j >= self.n_s() {
                return invalid("hoppings must satisfy i < j < n_s");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxSpin {
    pub frequency: f64,
    /// per-member coupling c_m = v_m/√N for each system spin m
    pub couplings: Vec<C64>,
    pub multiplicity: usize,
    pub mode: usize,
    pub member: usize,
    pub group: usize,
    pub interaction: Interaction,
    pub qubit: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QubitRates {
    pub damping: f64,
    pub dephasing: f64,
}

impl QubitRates {
    pub fn width(&self) -> f64 {
        effective_broadening(self.damping, self.dephasing)
    }
}

/// Requested treatment of system-qubit noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemNoise {
    Noiseless,
    /// damping turned into σ_x and σ_y noise (each at γ_s/4) by X gates between
    /// steps; γ_s = 4κ_system
    SymmetrizedDamping,
    /// σ_x collapse at κ_system
    BitFlip,
    /// physical damping/dephasing that the fit does not account for
    Raw { damping: f64, dephasing: f64 },
}

/// System collapse channels of a constructed model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemScheme {
    /// σ₋ at the qubit damping rate, σ_z at half its dephasing rate
    Physical,
    /// σ_x and σ_y at a quarter of the qubit damping rate each, σ_z as above
    Symmetrized,
    BitFlip { rates: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    /// Γ̄/γ̄ on the bath qubits
    pub dephasing_ratio: f64,
    pub system: SystemNoise,
}

impl NoiseProfile {
    pub fn damping_only() -> Self {
        NoiseProfile { dephasing_ratio: 0.0, system: SystemNoise::Noiseless }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinBathModel {
    pub system: SystemSpec,
    pub aux: Vec<AuxSpin>,
    /// effective continuous-time rates for every qubit, system qubits first
    pub rates: Vec<QubitRates>,
    pub scheme: SystemScheme,
    /// groups: interaction per group index
    pub groups: Vec<Interaction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwoBathForm {
    /// σ_x-coupled and σ_y-coupled groups
    Axes,
    /// exchange and pair-creation groups (native to iSWAP)
    Exchange,
}

pub fn effective_broadening(damping: f64, dephasing: f64) -> f64 {
    damping + 2.0 * dephasing
}

pub fn gate_error(t_gate: f64, damping: f64, dephasing: f64) -> f64 {
    t_gate * (damping + 2.0 * dephasing)
}

/// One- and two-qubit Pauli error equivalents of a damping-only gate error ε.
pub fn pauli_error_equivalents(eps: f64) -> (f64, f64) {
    (eps / 2.0, eps)
}

pub fn match_trotter_step(depth: usize, eps: f64, kappa: f64) -> Result<f64> {
    if depth == 0 || !(eps > 0.0) || !(kappa > 0.0) {
        return invalid("depth, ε and κ must be positive");
    }
    Ok(depth as f64 * eps / kappa)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decomposition {
    #[serde(rename = "ms")]
    NativeMS,
    #[serde(rename = "iswap")]
    NativeISwap,
    CnotB,
    CnotS,
    #[serde(rename = "cz")]
    ControlZ,
}

impl Decomposition {
    pub const ALL: [Decomposition; 5] =
        [Decomposition::NativeMS, Decomposition::NativeISwap, Decomposition::CnotB, Decomposition::CnotS, Decomposition::ControlZ];

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ms" | "native-ms" => Decomposition::NativeMS,
            "iswap" | "native-iswap" => Decomposition::NativeISwap,
            "cnot-b" | "cnotb" => Decomposition::CnotB,
            "cnot-s" | "cnots" => Decomposition::CnotS,
            "cz" | "control-z" => Decomposition::ControlZ,
            other => return invalid(format!("unknown decomposition `{other}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    XxOnly,
    TwoBath,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    #[default]
    AllToAll,
    SwapNetwork,
}

/// Layers added by one CNOT-based SWAP.
pub const SWAP_LAYERS: usize = 3;

/// Trotter-step depth per decomposition (single system spin).
pub fn circuit_depth(decomposition: Decomposition, n_q: usize, kind: ModelKind, connectivity: Connectivity) -> Result<usize> {
    if n_q == 0 {
        return invalid("at least one bath qubit required");
    }
    let per = match (kind, decomposition) {
        (ModelKind::XxOnly, Decomposition::NativeMS) => 1,
        (ModelKind::XxOnly, Decomposition::NativeISwap) => 4,
        (ModelKind::XxOnly, Decomposition::CnotB | Decomposition::CnotS) => 3,
        (ModelKind::XxOnly, Decomposition::ControlZ) => 5,
        (ModelKind::TwoBath, Decomposition::NativeMS | Decomposition::NativeISwap) => 2,
        (ModelKind::TwoBath, Decomposition::CnotB | Decomposition::CnotS) => 4,
        (ModelKind::TwoBath, Decomposition::ControlZ) => 6,
    };
    let base = 1 + per * n_q;
    match connectivity {
        Connectivity::AllToAll => Ok(base),
        Connectivity::SwapNetwork => {
            if n_q % 2 != 0 {
                return Err(Error::Unsupported("swap network needs an even bath-qubit count".into()));
            }
            if kind == ModelKind::TwoBath && decomposition == Decomposition::NativeISwap {
                return Err(Error::Unsupported("swap network for the exchange-form two-bath model".into()));
            }
            Ok(base + (n_q / 2 - 1) * SWAP_LAYERS)
        }
    }
}

fn system_scheme(bath: &LorentzianBath, noise: &NoiseProfile, n_s: usize) -> Result<(SystemScheme, Vec<QubitRates>)> {
    let kappa_sys = &bath.system_rates;
    let any_rate = kappa_sys.iter().any(|k| *k > 1e-9);
    if let (Some(r), Some(k)) = (&bath.ratios, bath.homogeneous_width()) {
        for (ri, ks) in r.iter().zip(kappa_sys) {
            if (ri * k - ks).abs() > 1e-9 * k.max(1.0) {
                return invalid(format!("κ_system = {ks} is inconsistent with r·κ = {}", ri * k));
            }
        }
    }
    Ok(match &noise.system {
        SystemNoise::Noiseless => {
            if any_rate {
                return invalid("bath carries κ_system > 0 but the system qubit is declared noiseless");
            }
            (SystemScheme::Physical, vec![QubitRates::default(); n_s])
        }
        SystemNoise::Raw { damping, dephasing } => {
            if any_rate {
                return invalid("bath carries κ_system > 0, which raw system noise cannot realize");
            }
            if !(*damping >= 0.0 && *dephasing >= 0.0) {
                return invalid("system rates must be ≥ 0");
            }
            (SystemScheme::Physical, vec![QubitRates { damping: *damping, dephasing: *dephasing }; n_s])
        }
        SystemNoise::SymmetrizedDamping => {
            if n_s != 1 {
                return Err(Error::Unsupported("noise symmetrization needs a single system spin".into()));
            }
            (SystemScheme::Symmetrized, vec![QubitRates { damping: 4.0 * kappa_sys[0], dephasing: 0.0 }])
        }
        SystemNoise::BitFlip => (SystemScheme::BitFlip { rates: kappa_sys.clone() }, vec![QubitRates::default(); n_s]),
    })
}

fn bath_qubit_rates(width: f64, dephasing_ratio: f64) -> QubitRates {
    let damping = width / (1.0 + 2.0 * dephasing_ratio);
    QubitRates { damping, dephasing: dephasing_ratio * damping }
}

/// Replaces mode i by N_i auxiliary spins with couplings v/√N_i.
pub fn bosons_to_spins(
    bath: &LorentzianBath,
    multiplicities: &[usize],
    system: &SystemSpec,
    noise: &NoiseProfile,
) -> Result<SpinBathModel> {
    bath.validate()?;
    system.validate()?;
    if multiplicities.len() != bath.modes.len() || multiplicities.iter().any(|&n| n == 0) {
        return invalid("one multiplicity ≥ 1 per mode required");
    }
    if bath.n_s != system.n_s() {
        return invalid("bath and system disagree on the number of system spins");
    }
    if !(noise.dephasing_ratio >= 0.0) {
        return invalid("dephasing ratio must be ≥ 0");
    }
    let n_s = system.n_s();
    let single_spin_real = n_s == 1;
    let (scheme, mut rates) = system_scheme(bath, noise, n_s)?;
    let mut aux = Vec::new();
    for (i, (mode, &nm)) in bath.modes.iter().zip(multiplicities).enumerate() {
        if single_spin_real && mode.couplings[0].im != 0.0 {
            return invalid("single-spin couplings must be real");
        }
        let scale = 1.0 / (nm as f64).sqrt();
        for member in 0..nm {
            aux.push(AuxSpin {
                frequency: mode.center,
                couplings: mode.couplings.iter().map(|v| v * scale).collect(),
                multiplicity: nm,
                mode: i,
                member,
                group: 0,
                interaction: Interaction::Axis(system.axis),
                qubit: n_s + aux.len(),
            });
            rates.push(bath_qubit_rates(mode.width, noise.dephasing_ratio));
        }
    }
    Ok(SpinBathModel { system: system.clone(), aux, rates, scheme, groups: vec![Interaction::Axis(system.axis)] })
}

/// Two independent baths with identical spectra coupled through σ_x and σ_y
/// (or, equivalently, through exchange and pair-creation terms).
pub fn build_two_bath_model(
    bath_x: &LorentzianBath,
    bath_y: &LorentzianBath,
    system: &SystemSpec,
    noise: &NoiseProfile,
    form: TwoBathForm,
) -> Result<SpinBathModel> {
    if system.n_s() != 1 || bath_x.n_s != 1 || bath_y.n_s != 1 {
        return Err(Error::Unsupported("two-bath model needs a single system spin".into()));
    }
    if !bath_y.modes.is_empty() && bath_y.modes.len() != bath_x.modes.len() {
        return invalid("the two baths must have the same number of modes");
    }
    if !bath_y.modes.is_empty() && (bath_x.system_rate() - bath_y.system_rate()).abs() > 1e-9 {
        return invalid("the two baths must share κ_system");
    }
    let mut sx = system.clone();
    sx.axis = Axis::X;
    let ones_x = vec![1; bath_x.modes.len()];
    let mut model = bosons_to_spins(bath_x, &ones_x, &sx, noise)?;
    if bath_y.modes.is_empty() {
        return Ok(model);
    }
    let mut sy = system.clone();
    sy.axis = Axis::Y;
    let ones_y = vec![1; bath_y.modes.len()];
    let y = bosons_to_spins(bath_y, &ones_y, &sy, noise)?;
    let offset = model.aux.len();
    let nx = bath_x.modes.len();
    for (k, mut a) in y.aux.into_iter().enumerate() {
        a.group = 1;
        a.mode += nx;
        a.qubit = 1 + offset + k;
        model.aux.push(a);
        model.rates.push(y.rates[1 + k]);
    }
    model.groups = vec![Interaction::Axis(Axis::X), Interaction::Axis(Axis::Y)];
    if form == TwoBathForm::Exchange {
        for (a, b) in bath_x.modes.iter().zip(&bath_y.modes) {
            let same = (a.center - b.center).abs() <= 1e-12 * a.center.abs().max(1.0)
                && (a.width - b.width).abs() <= 1e-12 * a.width
                && (a.couplings[0] - b.couplings[0]).norm() <= 1e-12 * a.couplings[0].norm().max(1e-300);
            if !same {
                return invalid("the exchange form needs identical baths");
            }
        }
        for a in model.aux.iter_mut() {
            a.interaction = if a.group == 0 { Interaction::Exchange } else { Interaction::PairCreation };
        }
        model.groups = vec![Interaction::Exchange, Interaction::PairCreation];
    }
    Ok(model)
}

impl SpinBathModel {
    pub fn n_s(&self) -> usize {
        self.system.n_s()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_s() + self.aux.len()
    }

    pub fn n_bath(&self) -> usize {
        self.aux.len()
    }

    pub fn kind(&self) -> Result<ModelKind> {
        if self.n_s() != 1 {
            return Err(Error::Unsupported("Table I depths cover a single system spin".into()));
        }
        match self.groups.as_slice() {
            [Interaction::Axis(Axis::X)] => Ok(ModelKind::XxOnly),
            [_, _] => Ok(ModelKind::TwoBath),
            _ => Err(Error::Unsupported("model outside the Table I families".into())),
        }
    }

    pub fn table_depth(&self, decomposition: Decomposition, connectivity: Connectivity) -> Result<usize> {
        circuit_depth(decomposition, self.n_bath(), self.kind()?, connectivity)
    }

    /// Largest bath-qubit width; the gate error ε refers to this qubit.
    pub fn reference_width(&self) -> f64 {
        self.rates[self.n_s()..].iter().map(QubitRates::width).fold(0.0, f64::max)
    }

    /// Weak-coupling spectral function seen by system spin m through group g:
    /// Σ |c|² κ/((κ/2)² + (ω − ω_a)²) with κ = γ + 2Γ of each auxiliary spin.
    pub fn group_spectral(&self, group: usize, omega: f64, m: usize) -> f64 {
        self.aux
            .iter()
            .filter(|a| a.group == group)
            .map(|a| {
                let k = self.rates[a.qubit].width();
                let d = omega - a.frequency;
                a.couplings[m].norm_sqr() * k / (0.25 * k * k + d * d)
            })
            .sum()
    }

    /// Hamiltonian as a sum of Pauli-product terms on the qubit register.
    pub fn hamiltonian(&self) -> Result<SparseOp> {
        let n = self.n_qubits();
        if n > 16 {
            return Err(Error::DimensionOverflow { dim: 1 << n, limit: 1 << 16 });
        }
        let dims = vec![2; n];
        let mut h = SparseOp::zeros(1 << n);
        let half = C64::new(0.5, 0.0);
        for (i, d) in self.system.splittings.iter().enumerate() {
            h = h.add(&SparseOp::embed(&(linalg::sigma_z() * C64::new(-0.5 * d, 0.0)), &[i], &dims));
        }
        for hop in &self.system.hoppings {
            let term = linalg::kron(&linalg::sigma_minus(), &linalg::sigma_plus()) * (half * hop.value);
            let op = SparseOp::embed(&term, &[hop.i, hop.j], &dims);
            h = h.add(&op).add(&op.adjoint());
        }
        for a in &self.aux {
            h = h.add(&SparseOp::embed(&(linalg::excited_projector() * C64::new(a.frequency, 0.0)), &[a.qubit], &dims));
            for (m, cpl) in a.couplings.iter().enumerate() {
                if *cpl == C64::new(0.0, 0.0) {
                    continue;
                }
                let local = coupling_matrix(a.interaction, *cpl)?;
                h = h.add(&SparseOp::embed(&local, &[m, a.qubit], &dims));
            }
        }
        Ok(h)
    }

    pub fn hamiltonian_dense(&self) -> Result<CMatrix> {
        Ok(self.hamiltonian()?.to_dense())
    }

    /// The model seen through X on the (single) system qubit: Δ → −Δ, σ_y and σ_z
    /// couplings change sign, exchange and pair creation swap roles.
    pub fn x_conjugated(&self) -> Result<SpinBathModel> {
        if self.n_s() != 1 {
            return Err(Error::Unsupported("X conjugation of multi-spin systems".into()));
        }
        let mut m = self.clone();
        m.system.splittings[0] = -m.system.splittings[0];
        for a in m.aux.iter_mut() {
            match a.interaction {
                Interaction::Axis(Axis::X) => {}
                Interaction::Axis(_) => a.couplings.iter_mut().for_each(|c| *c = -*c),
                Interaction::Exchange => a.interaction = Interaction::PairCreation,
                Interaction::PairCreation => a.interaction = Interaction::Exchange,
            }
        }
        Ok(m)
    }
}

/// 4×4 coupling term with the system spin on local bit 0 and the auxiliary spin on bit 1.
pub fn coupling_matrix(interaction: Interaction, c: C64) -> Result<CMatrix> {
    let sm = linalg::sigma_minus();
    let sp = linalg::sigma_plus();
    Ok(match interaction {
        Interaction::Axis(ax) => {
            let bath_op = &sm * c + &sp * c.conj();
            linalg::kron(&bath_op, &ax.matrix()) * C64::new(0.5, 0.0)
        }
        Interaction::Exchange | Interaction::PairCreation => {
            if c.im != 0.0 {
                return invalid("exchange couplings must be real");
            }
            let g = C64::new(c.re / 2f64.sqrt(), 0.0);
            let t = if interaction == Interaction::Exchange {
                linalg::kron(&sm, &sp) + linalg::kron(&sp, &sm)
            } else {
                linalg::kron(&sp, &sp) + linalg::kron(&sm, &sm)
            };
            t * g
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStrength {
    pub damping: f64,
    pub dephasing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterPlan {
    pub tau: f64,
    pub steps: usize,
    pub decomposition: Decomposition,
    pub depth: usize,
    pub gate_error: f64,
    /// p_γ = γ̄ t_gate and p_Γ = Γ̄ t_gate per qubit and layer
    pub strengths: Vec<LayerStrength>,
}

impl TrotterPlan {
    /// τ = Dε/κ_ref with per-layer strengths p = rate·τ/D.
    pub fn new(model: &SpinBathModel, decomposition: Decomposition, depth: usize, eps: f64, steps: usize) -> Result<Self> {
        let kappa = model.reference_width();
        let tau = match_trotter_step(depth, eps, kappa)?;
        Self::with_tau(model, decomposition, depth, tau, steps)
    }

    /// Fixed τ; the strengths still realize the model rates.
    pub fn with_tau(model: &SpinBathModel, decomposition: Decomposition, depth: usize, tau: f64, steps: usize) -> Result<Self> {
        if !(tau > 0.0) || depth == 0 {
            return invalid("τ and depth must be positive");
        }
        let scale = tau / depth as f64;
        let strengths: Vec<LayerStrength> = model
            .rates
            .iter()
            .map(|r| LayerStrength { damping: r.damping * scale, dephasing: r.dephasing * scale })
            .collect();
        if strengths.iter().any(|s| s.damping >= 1.0 || s.dephasing >= 1.0) {
            return invalid("per-layer noise strengths must stay below 1");
        }
        let gate_error = model.reference_width() * scale;
        Ok(TrotterPlan { tau, steps, decomposition, depth, gate_error, strengths })
    }

    /// Continuous rates recovered from the layer strengths: D·p/τ.
    pub fn effective_rates(&self) -> Vec<QubitRates> {
        let f = self.depth as f64 / self.tau;
        self.strengths.iter().map(|s| QubitRates { damping: f * s.damping, dephasing: f * s.dephasing }).collect()
    }
}
