//! Trotter-step circuits for the spin model in the five gate decompositions,
//! plus the X-gate noise symmetrization and a nearest-neighbour swap network.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, CMatrix, C64, ONE};
use crate::spin_model::{Axis, Decomposition, Interaction, SpinBathModel, TrotterPlan};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    Rx(f64),
    Ry(f64),
    Rz(f64),
    X,
    /// −i(cos β X + sin β Y), i.e. Rz(2β)·X up to phase
    PhasedX(f64),
    /// exp(−iθ σ_xσ_x/2)
    MS(f64),
    /// exp(−iθ(σ_xσ_x + σ_yσ_y)/4)
    ISwap(f64),
    /// control = first operand
    CNOT,
    CZ,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::MS(_) | GateKind::ISwap(_) | GateKind::CNOT | GateKind::CZ => 2,
            _ => 1,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            GateKind::Rx(t) | GateKind::Ry(t) | GateKind::Rz(t) | GateKind::PhasedX(t) | GateKind::MS(t) | GateKind::ISwap(t) => Some(t),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            GateKind::Rx(_) => "RX",
            GateKind::Ry(_) => "RY",
            GateKind::Rz(_) => "RZ",
            GateKind::X => "X",
            GateKind::PhasedX(_) => "PX",
            GateKind::MS(_) => "MS",
            GateKind::ISwap(_) => "ISWAP",
            GateKind::CNOT => "CNOT",
            GateKind::CZ => "CZ",
        }
    }

    /// Local unitary; for two-qubit gates local bit 0 is the first operand.
    pub fn matrix(&self) -> CMatrix {
        let rot = |t: f64, p: CMatrix| {
            let (s, co) = (t / 2.0).sin_cos();
            linalg::identity(2) * c(co, 0.0) - p * c(0.0, s)
        };
        match *self {
            GateKind::Rx(t) => rot(t, linalg::sigma_x()),
            GateKind::Ry(t) => rot(t, linalg::sigma_y()),
            GateKind::Rz(t) => rot(t, linalg::sigma_z()),
            GateKind::X => linalg::sigma_x(),
            GateKind::PhasedX(b) => (linalg::sigma_x() * c(b.cos(), 0.0) + linalg::sigma_y() * c(b.sin(), 0.0)) * c(0.0, -1.0),
            GateKind::MS(t) => {
                let xx = linalg::kron(&linalg::sigma_x(), &linalg::sigma_x());
                let (s, co) = (t / 2.0).sin_cos();
                linalg::identity(4) * c(co, 0.0) - xx * c(0.0, s)
            }
            GateKind::ISwap(t) => {
                // acts on span{|01⟩, |10⟩} as exp(−iθ σ_x/2)
                let (s, co) = (t / 2.0).sin_cos();
                let mut m = linalg::identity(4);
                m[(1, 1)] = c(co, 0.0);
                m[(2, 2)] = c(co, 0.0);
                m[(1, 2)] = c(0.0, -s);
                m[(2, 1)] = c(0.0, -s);
                m
            }
            GateKind::CNOT => {
                let mut m = CMatrix::zeros(4, 4);
                // control on bit 0: |c t⟩ index = c + 2t
                m[(0, 0)] = ONE;
                m[(2, 2)] = ONE;
                m[(3, 1)] = ONE;
                m[(1, 3)] = ONE;
                m
            }
            GateKind::CZ => {
                let mut m = linalg::identity(4);
                m[(3, 3)] = c(-1.0, 0.0);
                m
            }
        }
    }

    pub fn inverse(&self) -> GateKind {
        match *self {
            GateKind::Rx(t) => GateKind::Rx(-t),
            GateKind::Ry(t) => GateKind::Ry(-t),
            GateKind::Rz(t) => GateKind::Rz(-t),
            GateKind::MS(t) => GateKind::MS(-t),
            GateKind::ISwap(t) => GateKind::ISwap(-t),
            // self-inverse up to a global phase
            k => k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

impl Gate {
    pub fn one(kind: GateKind, q: usize) -> Self {
        Gate { kind, qubits: vec![q] }
    }

    pub fn two(kind: GateKind, a: usize, b: usize) -> Self {
        Gate { kind, qubits: vec![a, b] }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind.angle() {
            Some(t) => write!(f, "{}({:e})", self.kind.name(), t)?,
            None => write!(f, "{}", self.kind.name())?,
        }
        for q in &self.qubits {
            write!(f, " {q}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    System,
    Bath,
}

pub type Layer = Vec<Gate>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub roles: Vec<Role>,
    pub layers: Vec<Layer>,
}

impl Circuit {
    pub fn new(roles: Vec<Role>) -> Self {
        Circuit { n_qubits: roles.len(), roles, layers: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn push_layer(&mut self, layer: Layer) {
        self.layers.push(layer);
    }

    pub fn extend(&mut self, layers: Vec<Layer>) {
        self.layers.extend(layers);
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flatten()
    }

    pub fn validate(&self) -> Result<()> {
        if self.roles.len() != self.n_qubits {
            return invalid("role map must cover every qubit");
        }
        for (li, layer) in self.layers.iter().enumerate() {
            let mut used = vec![false; self.n_qubits];
            for g in layer {
                if g.qubits.len() != g.kind.arity() {
                    return invalid(format!("layer {li}: {g} has the wrong operand count"));
                }
                if let Some(t) = g.kind.angle() {
                    if !t.is_finite() {
                        return invalid(format!("layer {li}: non-finite angle"));
                    }
                }
                for &q in &g.qubits {
                    if q >= self.n_qubits {
                        return invalid(format!("layer {li}: qubit {q} out of range"));
                    }
                    if used[q] {
                        return invalid(format!("layer {li}: qubit {q} used twice"));
                    }
                    used[q] = true;
                }
            }
        }
        Ok(())
    }

    /// Reverse-order circuit whose unitary is the adjoint (up to phase).
    pub fn inverse(&self) -> Circuit {
        let layers = self
            .layers
            .iter()
            .rev()
            .map(|l| l.iter().map(|g| Gate { kind: g.kind.inverse(), qubits: g.qubits.clone() }).collect())
            .collect();
        Circuit { n_qubits: self.n_qubits, roles: self.roles.clone(), layers }
    }

    /// Line-oriented text: one layer per line, gates separated by `; `.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let roles: Vec<&str> = self.roles.iter().map(|r| if *r == Role::System { "s" } else { "b" }).collect();
        s.push_str(&format!("# qubits {} roles {}\n", self.n_qubits, roles.join("")));
        for layer in &self.layers {
            let g: Vec<String> = layer.iter().map(Gate::to_string).collect();
            s.push_str(&g.join("; "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty circuit text".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "#" || parts[1] != "qubits" || parts[3] != "roles" {
            return Err(Error::Parse("missing `# qubits N roles ...` header".into()));
        }
        let n: usize = parts[2].parse().map_err(|_| Error::Parse("bad qubit count".into()))?;
        let roles: Vec<Role> = parts[4]
            .chars()
            .map(|ch| match ch {
                's' => Ok(Role::System),
                'b' => Ok(Role::Bath),
                _ => Err(Error::Parse(format!("bad role `{ch}`"))),
            })
            .collect::<Result<_>>()?;
        if roles.len() != n {
            return Err(Error::Parse("role count differs from qubit count".into()));
        }
        let mut circ = Circuit::new(roles);
        for line in lines {
            let mut layer = Vec::new();
            for g in line.split(';').map(str::trim).filter(|g| !g.is_empty()) {
                layer.push(parse_gate(g)?);
            }
            circ.layers.push(layer);
        }
        circ.validate()?;
        Ok(circ)
    }
}

fn parse_gate(s: &str) -> Result<Gate> {
    let mut tok = s.split_whitespace();
    let head = tok.next().ok_or_else(|| Error::Parse("empty gate".into()))?;
    let (name, angle) = match head.find('(') {
        Some(p) => {
            let inner = head[p + 1..].strip_suffix(')').ok_or_else(|| Error::Parse(format!("bad gate `{head}`")))?;
            let t: f64 = inner.parse().map_err(|_| Error::Parse(format!("bad angle in `{head}`")))?;
            (&head[..p], Some(t))
        }
        None => (head, None),
    };
    let qubits: Vec<usize> = tok
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad qubit `{t}`"))))
        .collect::<Result<_>>()?;
    let need = |a: Option<f64>| a.ok_or_else(|| Error::Parse(format!("`{name}` needs an angle")));
    let kind = match name {
        "RX" => GateKind::Rx(need(angle)?),
        "RY" => GateKind::Ry(need(angle)?),
        "RZ" => GateKind::Rz(need(angle)?),
        "X" => GateKind::X,
        "PX" => GateKind::PhasedX(need(angle)?),
        "MS" => GateKind::MS(need(angle)?),
        "ISWAP" => GateKind::ISwap(need(angle)?),
        "CNOT" => GateKind::CNOT,
        "CZ" => GateKind::CZ,
        _ => return Err(Error::Parse(format!("unknown gate `{name}`"))),
    };
    if qubits.len() != kind.arity() {
        return Err(Error::Parse(format!("`{s}` has the wrong operand count")));
    }
    Ok(Gate { kind, qubits })
}

pub const MAX_UNITARY_QUBITS: usize = 12;

pub fn unitary_of(circuit: &Circuit) -> Result<CMatrix> {
    if circuit.n_qubits > MAX_UNITARY_QUBITS {
        return Err(Error::DimensionOverflow { dim: 1 << circuit.n_qubits, limit: 1 << MAX_UNITARY_QUBITS });
    }
    let mut u = linalg::identity(1 << circuit.n_qubits);
    for g in circuit.gates() {
        linalg::apply_local_left(&mut u, &g.kind.matrix(), &g.qubits);
    }
    Ok(u)
}

/// Ways to realize exp(−iθ σ_x^s σ_x^b/2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum XxScheme {
    Native,
    CnotB,
    CnotS,
    ControlZ,
    ISwapPair,
}

impl XxScheme {
    pub const ALL: [XxScheme; 5] = [XxScheme::Native, XxScheme::CnotB, XxScheme::CnotS, XxScheme::ControlZ, XxScheme::ISwapPair];

    pub fn of(d: Decomposition) -> XxScheme {
        match d {
            Decomposition::NativeMS => XxScheme::Native,
            Decomposition::NativeISwap => XxScheme::ISwapPair,
            Decomposition::CnotB => XxScheme::CnotB,
            Decomposition::CnotS => XxScheme::CnotS,
            Decomposition::ControlZ => XxScheme::ControlZ,
        }
    }
}

fn single(kind: GateKind, q: usize) -> Layer {
    vec![Gate::one(kind, q)]
}

fn pair(kind: GateKind, a: usize, b: usize) -> Layer {
    vec![Gate::two(kind, a, b)]
}

/// Layers whose product equals exp(−iθ σ_x^s σ_x^b/2) up to a global phase.
pub fn decompose_xx(theta: f64, scheme: XxScheme, s: usize, b: usize) -> Vec<Layer> {
    match scheme {
        XxScheme::Native => vec![pair(GateKind::MS(theta), s, b)],
        XxScheme::CnotB => vec![
            pair(GateKind::CNOT, b, s),
            single(GateKind::Rx(theta), b),
            pair(GateKind::CNOT, b, s),
        ],
        XxScheme::CnotS => vec![
            pair(GateKind::CNOT, s, b),
            single(GateKind::Rx(theta), s),
            pair(GateKind::CNOT, s, b),
        ],
        XxScheme::ControlZ => vec![
            single(GateKind::Ry(-FRAC_PI_2), s),
            pair(GateKind::CZ, s, b),
            single(GateKind::Rx(theta), b),
            pair(GateKind::CZ, s, b),
            single(GateKind::Ry(FRAC_PI_2), s),
        ],
        XxScheme::ISwapPair => vec![
            pair(GateKind::ISwap(theta), s, b),
            single(GateKind::X, s),
            pair(GateKind::ISwap(theta), s, b),
            single(GateKind::X, s),
        ],
    }
}

/// exp(−iθ(σ_xσ_x + σ_yσ_y)/2) from two XX gates; the YY factor is an XX gate
/// inside Rz(∓π/2) on both qubits.
pub fn decompose_hop(theta: f64, s: usize, b: usize) -> Vec<Layer> {
    vec![
        pair(GateKind::MS(theta), s, b),
        vec![Gate::one(GateKind::Rz(-FRAC_PI_2), s), Gate::one(GateKind::Rz(-FRAC_PI_2), b)],
        pair(GateKind::MS(theta), s, b),
        vec![Gate::one(GateKind::Rz(FRAC_PI_2), s), Gate::one(GateKind::Rz(FRAC_PI_2), b)],
    ]
}

fn axis_wrapped(axis: Axis, s: usize, core: Vec<Layer>) -> Vec<Layer> {
    let (pre, post) = match axis {
        Axis::X => return core,
        Axis::Y => (GateKind::Rz(-FRAC_PI_2), GateKind::Rz(FRAC_PI_2)),
        Axis::Z => (GateKind::Ry(FRAC_PI_2), GateKind::Ry(-FRAC_PI_2)),
    };
    let mut out = vec![single(pre, s)];
    out.extend(core);
    out.push(single(post, s));
    out
}

/// exp(−iτ H_sa) for one system-auxiliary coupling term.
fn coupling_layers(interaction: Interaction, cpl: C64, tau: f64, decomposition: Decomposition, s: usize, b: usize) -> Result<Vec<Layer>> {
    if cpl.im != 0.0 {
        return Err(Error::Unsupported("complex system-bath couplings in circuits".into()));
    }
    let g = cpl.re;
    Ok(match interaction {
        Interaction::Axis(axis) => axis_wrapped(axis, s, decompose_xx(g * tau, XxScheme::of(decomposition), s, b)),
        Interaction::Exchange | Interaction::PairCreation => {
            // (g/√2)(XX ± YY)/2
            let hop = if decomposition == Decomposition::NativeISwap {
                vec![pair(GateKind::ISwap(2f64.sqrt() * g * tau), s, b)]
            } else {
                decompose_hop(g * tau / 2f64.sqrt(), s, b)
            };
            if interaction == Interaction::Exchange {
                hop
            } else {
                let mut out = vec![single(GateKind::X, s)];
                out.extend(hop);
                out.push(single(GateKind::X, s));
                out
            }
        }
    })
}

fn roles_of(model: &SpinBathModel) -> Vec<Role> {
    let mut r = vec![Role::System; model.n_s()];
    r.extend(std::iter::repeat(Role::Bath).take(model.n_bath()));
    r
}

fn free_layer(model: &SpinBathModel, tau: f64, qubit_of_system: usize, bath_offset: usize) -> Layer {
    let mut layer = vec![Gate::one(GateKind::Rz(-model.system.splittings[0] * tau), qubit_of_system)];
    for (k, a) in model.aux.iter().enumerate() {
        layer.push(Gate::one(GateKind::Rz(-a.frequency * tau), bath_offset + k));
    }
    layer
}

fn check_single(model: &SpinBathModel) -> Result<()> {
    if model.n_s() != 1 {
        return Err(Error::Unsupported("circuits are built for a single system spin".into()));
    }
    Ok(())
}

/// Free-evolution rotations first, then every coupling term in ascending
/// bath-qubit order.
pub fn trotter_step(model: &SpinBathModel, plan: &TrotterPlan) -> Result<Circuit> {
    check_single(model)?;
    let tau = plan.tau;
    let mut circ = Circuit::new(roles_of(model));
    circ.push_layer(free_layer(model, tau, 0, 1));
    for a in &model.aux {
        circ.extend(coupling_layers(a.interaction, a.couplings[0], tau, plan.decomposition, 0, a.qubit)?);
    }
    circ.validate()?;
    Ok(circ)
}

/// A periodic sequence of step circuits. `frames[k % L]` is the noiseless
/// map from the logical frame to the physical register after k steps, and
/// `embedding[q]` is the physical qubit holding logical qubit q initially
/// (extra physical qubits start in |0⟩).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub steps: Vec<Circuit>,
    pub frames: Vec<Circuit>,
    pub embedding: Vec<usize>,
    /// logical qubit whose noise rates each physical qubit inherits
    pub noise_source: Vec<usize>,
}

impl Schedule {
    pub fn plain(step: Circuit) -> Schedule {
        let n = step.n_qubits;
        let frame = Circuit::new(step.roles.clone());
        Schedule { steps: vec![step], frames: vec![frame], embedding: (0..n).collect(), noise_source: (0..n).collect() }
    }

    pub fn period(&self) -> usize {
        self.steps.len()
    }

    pub fn n_physical(&self) -> usize {
        self.steps[0].n_qubits
    }

    pub fn n_logical(&self) -> usize {
        self.embedding.len()
    }

    pub fn step(&self, k: usize) -> &Circuit {
        &self.steps[k % self.steps.len()]
    }

    pub fn frame(&self, k: usize) -> &Circuit {
        &self.frames[k % self.frames.len()]
    }

    pub fn depth(&self) -> usize {
        self.steps.iter().map(Circuit::depth).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() || self.steps.len() != self.frames.len() {
            return invalid("schedule needs one frame per step");
        }
        let n = self.n_physical();
        for c in self.steps.iter().chain(&self.frames) {
            if c.n_qubits != n {
                return invalid("schedule circuits disagree on the qubit count");
            }
            c.validate()?;
        }
        if self.noise_source.len() != n || self.embedding.iter().any(|&q| q >= n) {
            return invalid("schedule maps are inconsistent with the register");
        }
        Ok(())
    }
}

/// X gates on the system qubit between steps, alternating Û and Û̄ = XÛ'X
/// where Û' is the step of the X-conjugated model. Each X is merged into the
/// following free-evolution layer, so the depth is unchanged.
pub fn symmetrize(model: &SpinBathModel, plan: &TrotterPlan) -> Result<Schedule> {
    check_single(model)?;
    let u = trotter_step(model, plan)?;
    let ubar = trotter_step(&model.x_conjugated()?, plan)?;
    let merge = |mut c: Circuit| -> Circuit {
        let g = c.layers[0].iter_mut().find(|g| g.qubits == [0]).expect("free layer acts on the system");
        if let GateKind::Rz(phi) = g.kind {
            g.kind = GateKind::PhasedX(phi / 2.0);
        }
        c
    };
    let mut x_frame = Circuit::new(u.roles.clone());
    x_frame.push_layer(single(GateKind::X, 0));
    let id = Circuit::new(u.roles.clone());
    let n = u.n_qubits;
    let s = Schedule {
        steps: vec![merge(u), merge(ubar)],
        frames: vec![x_frame, id],
        embedding: (0..n).collect(),
        noise_source: (0..n).collect(),
    };
    s.validate()?;
    Ok(s)
}

/// CNOT-based SWAP.
pub fn swap_layers(a: usize, b: usize) -> Vec<Layer> {
    vec![pair(GateKind::CNOT, a, b), pair(GateKind::CNOT, b, a), pair(GateKind::CNOT, a, b)]
}

/// Linear chain of n_q/2 system registers, register k adjacent to bath qubits
/// 2k and 2k+1 and to registers k±1. The system state travels along the chain
/// (forward on even steps, backward on odd ones); bath states never move.
pub fn swap_network(model: &SpinBathModel, plan: &TrotterPlan) -> Result<Schedule> {
    check_single(model)?;
    let n_q = model.n_bath();
    if n_q < 2 || n_q % 2 != 0 {
        return Err(Error::Unsupported("swap network needs an even bath-qubit count ≥ 2".into()));
    }
    if model.aux.iter().any(|a| !matches!(a.interaction, Interaction::Axis(_))) {
        return Err(Error::Unsupported("swap network for exchange-form couplings".into()));
    }
    let regs = n_q / 2;
    let mut roles = vec![Role::System; regs];
    roles.extend(std::iter::repeat(Role::Bath).take(n_q));
    let bath = |j: usize| regs + j;
    let tau = plan.tau;
    let build = |forward: bool| -> Result<Circuit> {
        let mut circ = Circuit::new(roles.clone());
        let start = if forward { 0 } else { regs - 1 };
        circ.push_layer(free_layer(model, tau, start, regs));
        let order: Vec<usize> = if forward { (0..regs).collect() } else { (0..regs).rev().collect() };
        for (pos, &k) in order.iter().enumerate() {
            let js = if forward { [2 * k, 2 * k + 1] } else { [2 * k + 1, 2 * k] };
            for j in js {
                let a = &model.aux[j];
                circ.extend(coupling_layers(a.interaction, a.couplings[0], tau, plan.decomposition, k, bath(j))?);
            }
            if pos + 1 < regs {
                let next = order[pos + 1];
                circ.extend(swap_layers(k, next));
            }
        }
        Ok(circ)
    };
    let mut shift = Circuit::new(roles.clone());
    for k in 0..regs.saturating_sub(1) {
        shift.extend(swap_layers(k, k + 1));
    }
    let mut embedding = vec![0];
    embedding.extend((0..n_q).map(bath));
    let mut noise_source = vec![0; regs];
    noise_source.extend(1..=n_q);
    let s = Schedule {
        steps: vec![build(true)?, build(false)?],
        frames: vec![Circuit::new(roles.clone()), shift],
        embedding,
        noise_source,
    };
    s.validate()?;
    Ok(s)
}

/// Gates other than Rz with |θ| ≥ π/4 (X and PhasedX count as π) that touch a
/// bath qubit.
pub fn large_angle_bath_rotations(circuit: &Circuit) -> Vec<Gate> {
    circuit
        .gates()
        .filter(|g| g.qubits.len() == 1 && circuit.roles[g.qubits[0]] == Role::Bath)
        .filter(|g| match g.kind {
            GateKind::Rz(_) => false,
            GateKind::X | GateKind::PhasedX(_) => true,
            k => k.angle().map_or(false, |t| t.abs() >= PI / 4.0),
        })
        .cloned()
        .collect()
}

/// Exact 4×4 exp(−iθ σ_aσ_b/2)-type reference used by tests and the CLI check.
pub fn exact_two_qubit(generator: &CMatrix, theta: f64) -> CMatrix {
    linalg::expm(&(generator * c(0.0, -theta / 2.0)))
}

pub fn xx_generator() -> CMatrix {
    linalg::kron(&linalg::sigma_x(), &linalg::sigma_x())
}

pub fn hop_generator() -> CMatrix {
    xx_generator() + linalg::kron(&linalg::sigma_y(), &linalg::sigma_y())
}

/// Unitary of layers on a 2-qubit register (system = qubit 0, bath = qubit 1).
pub fn layers_unitary(layers: &[Layer], n: usize) -> CMatrix {
    let mut u = linalg::identity(1 << n);
    for g in layers.iter().flatten() {
        linalg::apply_local_left(&mut u, &g.kind.matrix(), &g.qubits);
    }
    u
}
