//! Reference master-equation solver for the coarse-grained models: the
//! all-spin Lindbladian and the truncated-boson one.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::coarse_grain::LorentzianBath;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, CMatrix, SparseOp, C64, ONE, ZERO};
use crate::observable::{Diagnostics, Observable, Trajectory};
use crate::spin_model::{Axis, SpinBathModel, SystemScheme, SystemSpec};

pub const MAX_DIM: usize = 4096;
/// Largest d for which steady states use a dense null-space solve.
pub const DENSE_STEADY_DIM: usize = 64;

#[derive(Clone, Debug)]
pub struct CollapseOp {
    pub label: String,
    pub op: SparseOp,
    pub rate: f64,
}

/// dρ/dt = −i[H, ρ] + Σ r (LρL† − ½{L†L, ρ}) on a product space.
#[derive(Clone, Debug)]
pub struct LindbladSpec {
    pub dims: Vec<usize>,
    pub h: SparseOp,
    pub collapse: Vec<CollapseOp>,
}

impl LindbladSpec {
    pub fn dim(&self) -> usize {
        self.h.dim
    }

    pub fn validate(&self) -> Result<()> {
        let d: usize = self.dims.iter().product();
        if d != self.h.dim {
            return invalid("Hamiltonian dimension differs from the product space");
        }
        if d > MAX_DIM {
            return Err(Error::DimensionOverflow { dim: d, limit: MAX_DIM });
        }
        if self.h.hermiticity_error() > 1e-12 {
            return invalid("Hamiltonian must be Hermitian");
        }
        for l in &self.collapse {
            if l.op.dim != d || !(l.rate >= 0.0) || !l.rate.is_finite() {
                return invalid(format!("collapse term `{}` is malformed", l.label));
            }
        }
        Ok(())
    }

    pub fn add_collapse(&mut self, label: impl Into<String>, local: &CMatrix, sites: &[usize], rate: f64) {
        if rate > 0.0 {
            self.collapse.push(CollapseOp { label: label.into(), op: SparseOp::embed(local, sites, &self.dims), rate });
        }
    }

    /// L[ρ] evaluated directly; ρ need not be Hermitian.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let rd = rho.adjoint();
        // ρX = (X† ρ†)†
        let right = |op: &SparseOp| op.adjoint().mul_dense(&rd).adjoint();
        let mut out = (self.h.mul_dense(rho) - right(&self.h)) * c(0.0, -1.0);
        for l in &self.collapse {
            let lrl = l.op.mul_dense(&right(&l.op.adjoint()));
            let ldl = l.op.adjoint().matmul(&l.op);
            let anti = ldl.mul_dense(rho) + right(&ldl);
            out += (lrl - anti * c(0.5, 0.0)) * c(l.rate, 0.0);
        }
        out
    }

    /// Dense Liouvillian (column-stacking), built column by column.
    pub fn liouvillian(&self) -> Result<CMatrix> {
        let d = self.dim();
        if d > DENSE_STEADY_DIM {
            return Err(Error::DimensionOverflow { dim: d * d, limit: DENSE_STEADY_DIM * DENSE_STEADY_DIM });
        }
        let mut l = CMatrix::zeros(d * d, d * d);
        for j in 0..d {
            for i in 0..d {
                let mut e = CMatrix::zeros(d, d);
                e[(i, j)] = ONE;
                l.column_mut(j * d + i).copy_from(&linalg::vectorize(&self.apply(&e)));
            }
        }
        Ok(l)
    }
}

/// Collapse operators for the spin model: σ₋ at γ and σ_z at Γ/2 on every
/// bath qubit, and the system channels of the model's scheme.
pub fn build_spin_lindblad(model: &SpinBathModel) -> Result<LindbladSpec> {
    let n = model.n_qubits();
    if n > 12 {
        return Err(Error::DimensionOverflow { dim: 1 << n, limit: 1 << 12 });
    }
    let mut spec = LindbladSpec { dims: vec![2; n], h: model.hamiltonian()?, collapse: Vec::new() };
    let n_s = model.n_s();
    for (q, r) in model.rates.iter().enumerate() {
        let name = if q < n_s { format!("s{q}") } else { format!("b{}", q - n_s) };
        let physical = q >= n_s || model.scheme == SystemScheme::Physical;
        if physical {
            spec.add_collapse(format!("{name}:sm"), &linalg::sigma_minus(), &[q], r.damping);
        } else if model.scheme == SystemScheme::Symmetrized {
            spec.add_collapse(format!("{name}:sx"), &linalg::sigma_x(), &[q], r.damping / 4.0);
            spec.add_collapse(format!("{name}:sy"), &linalg::sigma_y(), &[q], r.damping / 4.0);
        }
        spec.add_collapse(format!("{name}:sz"), &linalg::sigma_z(), &[q], r.dephasing / 2.0);
    }
    if let SystemScheme::BitFlip { rates } = &model.scheme {
        for (m, k) in rates.iter().enumerate() {
            spec.add_collapse(format!("s{m}:sx"), &linalg::sigma_x(), &[m], *k);
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn system_hamiltonian(system: &SystemSpec, dims: &[usize]) -> SparseOp {
    let mut h = SparseOp::zeros(dims.iter().product());
    for (i, d) in system.splittings.iter().enumerate() {
        h = h.add(&SparseOp::embed(&(linalg::sigma_z() * c(-0.5 * d, 0.0)), &[i], dims));
    }
    for hop in &system.hoppings {
        let term = linalg::kron(&linalg::sigma_minus(), &linalg::sigma_plus()) * (hop.value * 0.5);
        let op = SparseOp::embed(&term, &[hop.i, hop.j], dims);
        h = h.add(&op).add(&op.adjoint());
    }
    h
}

/// Truncated-boson Lindbladian of one or more Lorentzian baths, each coupled
/// through ½σ_a ⊗ (v b + v* b†) and carrying its white background as σ_a
/// noise at κ_system.
pub fn build_boson_lindblad_multi(baths: &[(&LorentzianBath, Axis)], system: &SystemSpec, n_max: usize) -> Result<LindbladSpec> {
    system.validate()?;
    let n_s = system.n_s();
    let mut dims = vec![2; n_s];
    for (b, _) in baths {
        b.validate()?;
        if b.n_s != n_s {
            return invalid("bath and system disagree on the number of system spins");
        }
        dims.extend(std::iter::repeat(n_max + 1).take(b.modes.len()));
    }
    let d: f64 = dims.iter().map(|&x| x as f64).product();
    if d > MAX_DIM as f64 {
        return Err(Error::DimensionOverflow { dim: d as usize, limit: MAX_DIM });
    }
    let a = linalg::annihilation(n_max);
    let ad = a.adjoint();
    let num = &ad * &a;
    let mut h = system_hamiltonian(system, &dims);
    let mut spec = LindbladSpec { dims: dims.clone(), h: SparseOp::zeros(h.dim), collapse: Vec::new() };
    let mut site = n_s;
    for (b, axis) in baths {
        for mode in &b.modes {
            h = h.add(&SparseOp::embed(&(&num * c(mode.center, 0.0)), &[site], &dims));
            for (m, v) in mode.couplings.iter().enumerate() {
                if *v == ZERO {
                    continue;
                }
                let bath_op = &a * *v + &ad * v.conj();
                let local = linalg::kron(&bath_op, &axis.matrix()) * c(0.5, 0.0);
                h = h.add(&SparseOp::embed(&local, &[m, site], &dims));
            }
            spec.add_collapse(format!("mode{}", site - n_s), &a, &[site], mode.width);
            site += 1;
        }
        for (m, k) in b.system_rates.iter().enumerate() {
            spec.add_collapse(format!("s{m}:{axis:?}"), &axis.matrix(), &[m], *k);
        }
    }
    spec.h = h;
    spec.validate()?;
    Ok(spec)
}

pub fn build_boson_lindblad(bath: &LorentzianBath, system: &SystemSpec, n_max: usize) -> Result<LindbladSpec> {
    build_boson_lindblad_multi(&[(bath, system.axis)], system, n_max)
}

/// System state ⊗ ground state of everything else (system spins are the low sites).
pub fn product_initial_state(dims: &[usize], n_s: usize, system: &CMatrix) -> Result<CMatrix> {
    let ds: usize = dims[..n_s].iter().product();
    if system.nrows() != ds {
        return invalid("system state dimension mismatch");
    }
    let d: usize = dims.iter().product();
    let mut rho = CMatrix::zeros(d, d);
    rho.view_mut((0, 0), (ds, ds)).copy_from(system);
    Ok(rho)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub t_end: f64,
    pub dt: f64,
    /// record every `sample_every` steps
    pub sample_every: usize,
    /// positivity check every this many samples (0 disables)
    pub positivity_every: usize,
    pub keep_states: bool,
}

impl IntegrateOptions {
    pub fn new(t_end: f64, dt: f64, sample_every: usize) -> Self {
        IntegrateOptions { t_end, dt, sample_every, positivity_every: 10, keep_states: false }
    }
}

/// Lawson (integrating-factor) RK4: the elementwise part of L acting on
/// coherences, from the diagonal of H_eff and diagonal jump operators, is
/// propagated exactly; the remainder goes through classical RK4. Population
/// loss stays with its matching gain in the RK4 part, so the elementwise
/// factor is 1 on the diagonal and every stage is trace-free: the trace is
/// conserved to rounding.
struct Stepper {
    d: usize,
    /// elementwise generator a_ab, column-major like ρ
    gen: Vec<C64>,
    h_off: SparseOp,
    jumps: Vec<(SparseOp, f64, Option<Vec<(usize, usize, C64)>>)>,
    /// total jump-out rate of each basis state
    pop_loss: Vec<f64>,
    /// row-sum bound on the RK4 part; always ≥ `radius`
    nonstiff_norm: f64,
    /// spectral radius estimate of the RK4 part
    radius: f64,
}

impl Stepper {
    fn new(spec: &LindbladSpec) -> Self {
        let d = spec.dim();
        let mut h_eff = spec.h.clone();
        for l in &spec.collapse {
            let ldl = l.op.adjoint().matmul(&l.op).scale(c(0.0, -0.5 * l.rate));
            h_eff = h_eff.add(&ldl);
        }
        let hd = h_eff.diagonal();
        let mut gen = vec![ZERO; d * d];
        for b in 0..d {
            for a in 0..d {
                gen[a + b * d] = c(0.0, -1.0) * hd[a] + c(0.0, 1.0) * hd[b].conj();
            }
        }
        let mut jumps = Vec::new();
        let mut nonstiff_norm = 0.0;
        let h_off = h_eff.off_diagonal();
        nonstiff_norm += 2.0 * h_off.row_sum_norm();
        for l in &spec.collapse {
            if l.op.is_diagonal() {
                let ld = l.op.diagonal();
                for b in 0..d {
                    for a in 0..d {
                        gen[a + b * d] += ld[a] * ld[b].conj() * l.rate;
                    }
                }
            } else {
                let n = l.op.row_sum_norm();
                nonstiff_norm += l.rate * n * n;
                let mono = if l.op.is_monomial() {
                    // (column, row, value) of each nonzero, by column
                    let mut m = Vec::new();
                    for r in 0..d {
                        for k in l.op.row_ptr[r]..l.op.row_ptr[r + 1] {
                            m.push((l.op.cols[k], r, l.op.vals[k]));
                        }
                    }
                    m.sort_by_key(|e| e.0);
                    Some(m)
                } else {
                    None
                };
                jumps.push((l.op.clone(), l.rate, mono));
            }
        }
        let pop_loss: Vec<f64> = (0..d).map(|a| -std::mem::replace(&mut gen[a + a * d], ZERO).re).collect();
        nonstiff_norm += pop_loss.iter().cloned().fold(0.0, f64::max);
        let mut stepper = Stepper { d, gen, h_off, jumps, pop_loss, nonstiff_norm, radius: nonstiff_norm };
        stepper.radius = stepper.estimate_radius().min(nonstiff_norm);
        stepper
    }

    /// Gelfand estimate max_k ‖N^k x‖^{1/k} over k in 16..=32 from a fixed
    /// generic Hermitian start. The row-sum bound adds every jump rate, while
    /// the radius is set by the fastest single decay.
    fn estimate_radius(&self) -> f64 {
        let d = self.d;
        let mut x = CMatrix::from_fn(d, d, |a, b| {
            let (lo, hi) = (a.min(b), a.max(b));
            let re = ((lo * 7 + hi * 13 + 3) % 17) as f64 / 17.0 - 0.45;
            let im = ((lo * 5 + hi * 11 + 1) % 19) as f64 / 19.0 - 0.5;
            if a == b { c(re + 1.0, 0.0) } else if a < b { c(re, im) } else { c(re, -im) }
        });
        let mut y = CMatrix::zeros(d, d);
        let mut scratch = CMatrix::zeros(d, d);
        let mut log_norm = -x.norm().ln();
        x /= c(x.norm(), 0.0);
        let mut best: f64 = 0.0;
        for k in 1..=32 {
            self.nonstiff(&x, &mut y, &mut scratch);
            let n = y.norm();
            if n == 0.0 || !n.is_finite() {
                return if n == 0.0 { best } else { self.nonstiff_norm };
            }
            log_norm += n.ln();
            std::mem::swap(&mut x, &mut y);
            x /= c(n, 0.0);
            if k >= 16 {
                best = best.max((log_norm / k as f64).exp());
            }
        }
        best
    }

    fn nonstiff(&self, rho: &CMatrix, out: &mut CMatrix, scratch: &mut CMatrix) {
        let d = self.d;
        self.h_off.mul_dense_into(rho, scratch);
        {
            // −iX + iX†, transposed in tiles
            const TILE: usize = 32;
            let (o, x) = (out.as_mut_slice(), scratch.as_slice());
            for b0 in (0..d).step_by(TILE) {
                for a0 in (0..d).step_by(TILE) {
                    for b in b0..(b0 + TILE).min(d) {
                        for a in a0..(a0 + TILE).min(d) {
                            let (p, q) = (x[a + b * d], x[b + a * d]);
                            o[a + b * d] = C64::new(p.im + q.im, q.re - p.re);
                        }
                    }
                }
            }
        }
        let (o, r) = (out.as_mut_slice(), rho.as_slice());
        for (a, loss) in self.pop_loss.iter().enumerate() {
            o[a + a * d] -= r[a + a * d] * *loss;
        }
        for (op, rate, mono) in &self.jumps {
            match mono {
                Some(pairs) => {
                    for &(b, rb, vb) in pairs {
                        let wb = vb.conj() * *rate;
                        let (src, dst) = (b * d, rb * d);
                        for &(a, ra, va) in pairs {
                            o[ra + dst] += va * wb * r[a + src];
                        }
                    }
                }
                None => {
                    let lr = op.mul_dense(rho);
                    let lrl = op.mul_dense(&lr.adjoint()).adjoint();
                    for (oi, li) in o.iter_mut().zip(lrl.as_slice()) {
                        *oi += li * *rate;
                    }
                }
            }
        }
    }

    fn step(&self, rho: &mut CMatrix, dt: f64, eh: &[C64], ef: &[C64], work: &mut [CMatrix; 7]) {
        let [k1, k2, k3, k4, tmp, ehr, scratch] = work;
        let n = self.d * self.d;
        self.nonstiff(rho, k1, scratch);
        {
            let (t, r, k) = (tmp.as_mut_slice(), rho.as_slice(), k1.as_slice());
            for i in 0..n {
                t[i] = eh[i] * (r[i] + k[i] * (dt / 2.0));
            }
        }
        self.nonstiff(tmp, k2, scratch);
        {
            let (e, r) = (ehr.as_mut_slice(), rho.as_slice());
            for i in 0..n {
                e[i] = eh[i] * r[i];
            }
            let (t, k) = (tmp.as_mut_slice(), k2.as_slice());
            for i in 0..n {
                t[i] = e[i] + k[i] * (dt / 2.0);
            }
        }
        self.nonstiff(tmp, k3, scratch);
        {
            let (t, r, k) = (tmp.as_mut_slice(), rho.as_slice(), k3.as_slice());
            for i in 0..n {
                t[i] = ef[i] * r[i] + eh[i] * k[i] * dt;
            }
        }
        self.nonstiff(tmp, k4, scratch);
        let r = rho.as_mut_slice();
        let (a, b, cc, dd) = (k1.as_slice(), k2.as_slice(), k3.as_slice(), k4.as_slice());
        for i in 0..n {
            r[i] = ef[i] * r[i] + (ef[i] * a[i] + eh[i] * (b[i] + cc[i]) * 2.0 + dd[i]) * (dt / 6.0);
        }
    }
}

pub fn stability_product(spec: &LindbladSpec, dt: f64) -> f64 {
    Stepper::new(spec).radius * dt
}

pub const STABILITY_LIMIT: f64 = 0.1;
/// Largest dt allowed by the stability guard, rounded down to divide `sample`.
pub fn suggest_dt(spec: &LindbladSpec, sample: f64) -> f64 {
    let radius = Stepper::new(spec).radius.max(1e-12);
    let sub = (sample * radius / (0.9 * STABILITY_LIMIT)).ceil().max(1.0);
    sample / sub
}

pub fn integrate(spec: &LindbladSpec, rho0: &CMatrix, opts: &IntegrateOptions, observables: &[Observable]) -> Result<Trajectory> {
    spec.validate()?;
    let d = spec.dim();
    if rho0.nrows() != d || rho0.ncols() != d {
        return invalid("initial state dimension mismatch");
    }
    if !(opts.dt > 0.0) || !(opts.t_end >= 0.0) || opts.sample_every == 0 {
        return invalid("dt, t_end and sample_every must be positive");
    }
    let stepper = Stepper::new(spec);
    let product = stepper.radius * opts.dt;
    if product >= STABILITY_LIMIT {
        return Err(Error::Stability { product, limit: STABILITY_LIMIT });
    }
    let steps = (opts.t_end / opts.dt).round() as usize;
    let eh: Vec<C64> = stepper.gen.iter().map(|g| (g * (opts.dt / 2.0)).exp()).collect();
    let ef: Vec<C64> = stepper.gen.iter().map(|g| (g * opts.dt).exp()).collect();
    let mut work: [CMatrix; 7] = std::array::from_fn(|_| CMatrix::zeros(d, d));
    let mut rho = rho0.clone();
    let mut traj = Trajectory::new(observables.iter().map(|o| o.name.clone()).collect());
    let mut states = Vec::new();
    let mut diag = Diagnostics::default();
    let mut samples = 0usize;
    let mut record = |rho: &CMatrix, k: usize, traj: &mut Trajectory, diag: &mut Diagnostics| -> Result<()> {
        let check = opts.positivity_every > 0 && samples % opts.positivity_every == 0;
        samples += 1;
        diag.record(rho, check, 1e-6).map_err(|e| Error::Invariant(format!("t = {}: {e}", k as f64 * opts.dt)))?;
        if diag.max_trace_error > 1e-8 {
            return Err(Error::Invariant(format!("trace drifted by {:.3e}", diag.max_trace_error)));
        }
        let row = observables.iter().map(|o| o.expectation(rho)).collect::<Result<Vec<f64>>>()?;
        traj.push(k as f64 * opts.dt, row);
        if opts.keep_states {
            states.push(rho.clone());
        }
        Ok(())
    };
    record(&rho, 0, &mut traj, &mut diag)?;
    for k in 1..=steps {
        stepper.step(&mut rho, opts.dt, &eh, &ef, &mut work);
        linalg::hermitize(&mut rho);
        if k % opts.sample_every == 0 {
            record(&rho, k, &mut traj, &mut diag)?;
        }
    }
    traj.diagnostics = diag;
    if opts.keep_states {
        traj.states = Some(states);
    }
    Ok(traj)
}

/// Final state after integrating to t_end without recording.
pub fn evolve(spec: &LindbladSpec, rho0: &CMatrix, t_end: f64, dt: f64) -> Result<CMatrix> {
    let stepper = Stepper::new(spec);
    let product = stepper.radius * dt;
    if product >= STABILITY_LIMIT {
        return Err(Error::Stability { product, limit: STABILITY_LIMIT });
    }
    let d = spec.dim();
    let eh: Vec<C64> = stepper.gen.iter().map(|g| (g * (dt / 2.0)).exp()).collect();
    let ef: Vec<C64> = stepper.gen.iter().map(|g| (g * dt).exp()).collect();
    let mut work: [CMatrix; 7] = std::array::from_fn(|_| CMatrix::zeros(d, d));
    let mut rho = rho0.clone();
    for _ in 0..(t_end / dt).round() as usize {
        stepper.step(&mut rho, dt, &eh, &ef, &mut work);
        linalg::hermitize(&mut rho);
    }
    Ok(rho)
}

pub fn residual(spec: &LindbladSpec, rho: &CMatrix) -> f64 {
    linalg::trace_norm_hermitian(&spec.apply(rho))
}

/// Stationary state with ‖L[ρ]‖₁ below `tol`: a null-space solve for small
/// spaces, long-time integration otherwise.
pub fn steady_state(spec: &LindbladSpec, tol: f64) -> Result<CMatrix> {
    spec.validate()?;
    if spec.collapse.iter().all(|l| l.rate == 0.0) {
        return invalid("steady state needs at least one dissipative term");
    }
    let d = spec.dim();
    let rho = if d <= DENSE_STEADY_DIM {
        let mut l = spec.liouvillian()?;
        let n2 = d * d;
        for j in 0..n2 {
            l[(0, j)] = if j % (d + 1) == 0 { ONE } else { ZERO };
        }
        let mut rhs = DVector::from_element(n2, ZERO);
        rhs[0] = ONE;
        let sol = l.lu().solve(&rhs).ok_or_else(|| Error::NonConvergence("Liouvillian null space is degenerate".into()))?;
        let mut rho = linalg::unvectorize(&sol, d);
        linalg::hermitize(&mut rho);
        rho
    } else {
        let dt = suggest_dt(spec, 1.0);
        let mut rho = CMatrix::zeros(d, d);
        rho[(0, 0)] = ONE;
        let mut t = 0.0;
        let rate_floor = spec.collapse.iter().map(|l| l.rate).filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min);
        let horizon = 200.0 / rate_floor;
        loop {
            rho = evolve(spec, &rho, 10.0, dt)?;
            t += 10.0;
            if residual(spec, &rho) < tol {
                break rho;
            }
            if t > horizon {
                return Err(Error::NonConvergence(format!("no steady state within t = {horizon:.3e}")));
            }
        }
    };
    let res = residual(spec, &rho);
    if res >= tol {
        return Err(Error::NonConvergence(format!("steady-state residual {res:.3e} ≥ {tol:.3e}")));
    }
    if !linalg::is_psd_within(&rho, 1e-8) {
        return Err(Error::Invariant(format!("steady state has eigenvalue {:.3e}", linalg::min_eigenvalue(&rho))));
    }
    Ok(rho)
}

/// Reduced state of the first `n_sites` sites.
pub fn partial_trace_keep_low(rho: &CMatrix, dims: &[usize], n_sites: usize) -> CMatrix {
    let dk: usize = dims[..n_sites].iter().product();
    let dr: usize = dims[n_sites..].iter().product();
    let mut out = CMatrix::zeros(dk, dk);
    for e in 0..dr {
        out += rho.view((e * dk, e * dk), (dk, dk));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_model::{bosons_to_spins, NoiseProfile, QubitRates, SystemNoise};
    use proptest::prelude::*;

    fn single_qubit(damping: f64, dephasing: f64) -> LindbladSpec {
        let mut s = LindbladSpec { dims: vec![2], h: SparseOp::zeros(2), collapse: Vec::new() };
        s.add_collapse("sm", &linalg::sigma_minus(), &[0], damping);
        s.add_collapse("sz", &linalg::sigma_z(), &[0], dephasing / 2.0);
        s
    }

    fn plus() -> CMatrix {
        CMatrix::from_element(2, 2, c(0.5, 0.0))
    }

    #[test]
    fn damped_and_dephased_qubit() {
        let (g, gd) = (0.8, 0.3);
        let spec = single_qubit(g, gd);
        let n = Observable::new("n", SparseOp::from_dense(&linalg::excited_projector())).unwrap();
        let mut opts = IntegrateOptions::new(3.0, 0.01, 10);
        opts.keep_states = true;
        let traj = integrate(&spec, &linalg::excited_projector(), &opts, &[n]).unwrap();
        for (t, row) in traj.times.iter().zip(&traj.values) {
            assert!((row[0] - (-g * t).exp()).abs() < 1e-10);
        }
        let traj = integrate(&spec, &plus(), &opts, &[]).unwrap();
        for (t, rho) in traj.times.iter().zip(traj.states.unwrap()) {
            // spectral width γ + 2Γ
            assert!((rho[(0, 1)].norm() - 0.5 * (-(g / 2.0 + gd) * t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn trivial_spec_is_static() {
        let spec = LindbladSpec { dims: vec![2, 2], h: SparseOp::zeros(4), collapse: Vec::new() };
        let rho = CMatrix::from_fn(4, 4, |i, j| if i == j { c(0.25, 0.0) } else { c(0.05, 0.01 * (i as f64 - j as f64)) });
        let out = evolve(&spec, &rho, 1.0, 0.1).unwrap();
        assert!(linalg::max_abs_diff(&out, &rho) < 1e-15);
    }

    fn two_spin_spec() -> LindbladSpec {
        let bath = LorentzianBath::single(&[(0.6, 1.2, 0.4)]);
        let noise = NoiseProfile { dephasing_ratio: 0.5, system: SystemNoise::Raw { damping: 0.1, dephasing: 0.05 } };
        let m = bosons_to_spins(&bath, &[2], &SystemSpec::single(1.0), &noise).unwrap();
        build_spin_lindblad(&m).unwrap()
    }

    #[test]
    fn integrator_matches_liouvillian_exponential() {
        let spec = two_spin_spec();
        let rho0 = product_initial_state(&spec.dims, 1, &plus()).unwrap();
        let l = spec.liouvillian().unwrap();
        let exact = linalg::unvectorize(&(linalg::expm(&(l * c(2.0, 0.0))) * linalg::vectorize(&rho0)), 8);
        let got = evolve(&spec, &rho0, 2.0, 0.005).unwrap();
        assert!(linalg::max_abs_diff(&got, &exact) < 1e-9);
    }

    #[test]
    fn fourth_order_convergence() {
        let spec = two_spin_spec();
        let rho0 = product_initial_state(&spec.dims, 1, &plus()).unwrap();
        let l = spec.liouvillian().unwrap();
        let exact = linalg::unvectorize(&(linalg::expm(&(l * c(2.0, 0.0))) * linalg::vectorize(&rho0)), 8);
        let e1 = linalg::max_abs_diff(&evolve(&spec, &rho0, 2.0, 0.04).unwrap(), &exact);
        let e2 = linalg::max_abs_diff(&evolve(&spec, &rho0, 2.0, 0.02).unwrap(), &exact);
        let order = (e1 / e2).log2();
        assert!(order >= 3.5, "order {order}");
    }

    #[test]
    fn apply_matches_superoperators() {
        let spec = two_spin_spec();
        let mut l = linalg::hamiltonian_superop(&spec.h.to_dense());
        for op in &spec.collapse {
            l += linalg::dissipator_superop(&op.op.to_dense(), op.rate);
        }
        assert!(linalg::max_abs_diff(&l, &spec.liouvillian().unwrap()) < 1e-14);
    }

    #[test]
    fn stability_guard() {
        let spec = two_spin_spec();
        let rho0 = product_initial_state(&spec.dims, 1, &plus()).unwrap();
        assert!(matches!(integrate(&spec, &rho0, &IntegrateOptions::new(1.0, 1.0, 1), &[]), Err(Error::Stability { .. })));
        let dt = suggest_dt(&spec, 0.18);
        assert!(stability_product(&spec, dt) < STABILITY_LIMIT);
        assert!(((0.18 / dt).round() * dt - 0.18).abs() < 1e-12);
    }

    #[test]
    fn damped_qubit_steady_state_is_ground() {
        let rho = steady_state(&single_qubit(1.0, 0.2), 1e-10).unwrap();
        assert!(linalg::max_abs_diff(&rho, &linalg::ground_projector()) < 1e-12);
    }

    #[test]
    fn decoupled_boson_model_precesses() {
        let bath = LorentzianBath::single(&[(0.0, 1.0, 0.5)]);
        let sys = SystemSpec::single(0.9);
        let spec = build_boson_lindblad(&bath, &sys, 2).unwrap();
        let rho0 = product_initial_state(&spec.dims, 1, &plus()).unwrap();
        let sx = Observable::local("sx", &linalg::sigma_x(), &[0], &spec.dims).unwrap();
        let nb = Observable::local("n", &(linalg::annihilation(2).adjoint() * linalg::annihilation(2)), &[1], &spec.dims).unwrap();
        let traj = integrate(&spec, &rho0, &IntegrateOptions::new(5.0, 0.01, 10), &[sx, nb]).unwrap();
        assert_eq!(traj.values[0][1], 0.0);
        for (t, row) in traj.times.iter().zip(&traj.values) {
            assert!((row[0] - (0.9 * t).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn spin_and_boson_agree_at_weak_coupling() {
        let kappa = 1.0;
        let bath = LorentzianBath::single(&[(0.2 * kappa, 1.0, kappa)]);
        let sys = SystemSpec::single(1.0);
        let boson = build_boson_lindblad(&bath, &sys, 3).unwrap();
        let m = bosons_to_spins(&bath, &[1], &sys, &NoiseProfile::damping_only()).unwrap();
        let spin = build_spin_lindblad(&m).unwrap();
        let opts = IntegrateOptions::new(10.0 / kappa, 0.01, 10);
        let sx_b = Observable::local("sx", &linalg::sigma_x(), &[0], &boson.dims).unwrap();
        let sx_s = Observable::local("sx", &linalg::sigma_x(), &[0], &spin.dims).unwrap();
        let a = integrate(&boson, &product_initial_state(&boson.dims, 1, &plus()).unwrap(), &opts, &[sx_b]).unwrap();
        let b = integrate(&spin, &product_initial_state(&spin.dims, 1, &plus()).unwrap(), &opts, &[sx_s]).unwrap();
        let dev = a.values.iter().zip(&b.values).map(|(x, y)| (x[0] - y[0]).abs()).fold(0.0, f64::max);
        assert!(dev < 0.02, "{dev}");
    }

    #[test]
    fn symmetrized_system_channels() {
        let mut m = bosons_to_spins(&LorentzianBath::single(&[(0.3, 1.0, 0.5)]), &[1], &SystemSpec::single(1.0), &NoiseProfile::damping_only()).unwrap();
        m.scheme = SystemScheme::Symmetrized;
        m.rates[0] = QubitRates { damping: 0.8, dephasing: 0.0 };
        let spec = build_spin_lindblad(&m).unwrap();
        let labels: Vec<(&str, f64)> = spec.collapse.iter().map(|l| (l.label.as_str(), l.rate)).collect();
        assert!(labels.contains(&("s0:sx", 0.2)) && labels.contains(&("s0:sy", 0.2)));
        assert!(!labels.iter().any(|(l, _)| *l == "s0:sm"));
    }

    #[test]
    fn partial_trace_of_product() {
        let sys = plus();
        let rho = product_initial_state(&[2, 3], 1, &sys).unwrap();
        assert!(linalg::max_abs_diff(&partial_trace_keep_low(&rho, &[2, 3], 1), &sys) < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn trace_and_hermiticity_are_preserved(v in 0.0f64..1.0, w in 0.2f64..2.0, k in 0.1f64..1.0) {
            let bath = LorentzianBath::single(&[(v, w, k)]);
            let spec = build_boson_lindblad(&bath, &SystemSpec::single(1.0), 3).unwrap();
            let rho0 = product_initial_state(&spec.dims, 1, &plus()).unwrap();
            let dt = suggest_dt(&spec, 0.1);
            let traj = integrate(&spec, &rho0, &IntegrateOptions { t_end: 3.0, dt, sample_every: 1, positivity_every: 5, keep_states: false }, &[]).unwrap();
            prop_assert!(traj.diagnostics.max_trace_error < 1e-8);
            prop_assert!(traj.diagnostics.max_hermiticity_error < 1e-10);
        }
    }
}
