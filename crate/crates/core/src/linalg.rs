//! Complex matrices, Pauli algebra, tensor embedding and a small CSR type.
//!
//! Qubit convention: little-endian, qubit `q` is bit `q` of the basis index.
//! `|0⟩` is the σ_z = +1 state, σ₋ = |0⟩⟨1| lowers, σ₊σ₋ = |1⟩⟨1|.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn mat2(a: C64, b: C64, cc: C64, d: C64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[a, b, cc, d])
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn sigma_x() -> CMatrix {
    mat2(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> CMatrix {
    mat2(ZERO, -I, I, ZERO)
}

pub fn sigma_z() -> CMatrix {
    mat2(ONE, ZERO, ZERO, -ONE)
}

/// |0⟩⟨1|
pub fn sigma_minus() -> CMatrix {
    mat2(ZERO, ONE, ZERO, ZERO)
}

/// |1⟩⟨0|
pub fn sigma_plus() -> CMatrix {
    mat2(ZERO, ZERO, ONE, ZERO)
}

/// |1⟩⟨1|
pub fn excited_projector() -> CMatrix {
    mat2(ZERO, ZERO, ZERO, ONE)
}

/// |0⟩⟨0|
pub fn ground_projector() -> CMatrix {
    mat2(ONE, ZERO, ZERO, ZERO)
}

/// Bosonic annihilation operator truncated to `n_max + 1` Fock states.
pub fn annihilation(n_max: usize) -> CMatrix {
    let d = n_max + 1;
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    a
}

/// Kronecker product with `a` acting on the *high* bits: (a ⊗ b)[(i_a d_b + i_b), ...].
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Embeds a local operator acting on `sites` of a product space with the given
/// local dimensions. Site 0 is the fastest-varying digit. The local operator's
/// own index uses the same convention over `sites` in the listed order.
pub fn embed_dense(local: &CMatrix, sites: &[usize], dims: &[usize]) -> CMatrix {
    SparseOp::embed(local, sites, dims).to_dense()
}

/// Shorthand for a qubit register.
pub fn embed_qubits(local: &CMatrix, qubits: &[usize], n: usize) -> CMatrix {
    embed_dense(local, qubits, &vec![2; n])
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Max-entry distance after removing the global phase, aligned on the
/// largest-magnitude entry of `reference`.
pub fn phase_aligned_diff(candidate: &CMatrix, reference: &CMatrix) -> f64 {
    let (idx, _) = reference
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bv), (i, z)| if z.norm() > bv { (i, z.norm()) } else { (bi, bv) });
    let r = reference.as_slice()[idx];
    let q = candidate.as_slice()[idx];
    let phase = if q.norm() > 0.0 { (r / q) / (r / q).norm() } else { ONE };
    let aligned = candidate.map(|z| z * phase);
    max_abs_diff(&aligned, reference)
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        let d = m[(j, j)].re;
        m[(j, j)] = c(d, 0.0);
    }
}

pub fn trace(m: &CMatrix) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut h = m.clone();
    hermitize(&mut h);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Cheap positivity test: ρ + tol·I admits a Cholesky factorization iff
/// every eigenvalue of ρ exceeds −tol (up to rounding).
pub fn is_psd_within(m: &CMatrix, tol: f64) -> bool {
    let mut h = m.clone();
    hermitize(&mut h);
    // complex Cholesky in nalgebra takes complex square roots and never
    // fails, so factor the real symmetric embedding [[A, −B], [B, A]]
    let n = h.nrows();
    let real = nalgebra::DMatrix::<f64>::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        let v = match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        };
        if i == j { v + tol } else { v }
    });
    real.cholesky().is_some()
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

/// Column-stacking vectorization: vec(A X B) = (Bᵀ ⊗ A) vec(X).
pub fn superop_sandwich(a: &CMatrix, b: &CMatrix) -> CMatrix {
    kron(&b.transpose(), a)
}

/// Superoperator of ρ ↦ r(LρL† − ½{L†L, ρ}).
pub fn dissipator_superop(l: &CMatrix, rate: f64) -> CMatrix {
    let d = l.nrows();
    let id = identity(d);
    let ldl = l.adjoint() * l;
    let jump = superop_sandwich(l, &l.adjoint());
    let anti = superop_sandwich(&ldl, &id) + superop_sandwich(&id, &ldl);
    (jump - anti * c(0.5, 0.0)) * c(rate, 0.0)
}

/// Superoperator of ρ ↦ −i[H, ρ].
pub fn hamiltonian_superop(h: &CMatrix) -> CMatrix {
    let id = identity(h.nrows());
    (superop_sandwich(h, &id) - superop_sandwich(&id, h)) * (-I)
}

pub fn vectorize(m: &CMatrix) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &nalgebra::DVector<C64>, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Choi matrix of a superoperator acting on d×d matrices (column-stacking).
pub fn choi_of_superop(s: &CMatrix, d: usize) -> CMatrix {
    let mut choi = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            // image of |i⟩⟨j|
            let col = s.column(j * d + i);
            for a in 0..d {
                for b in 0..d {
                    choi[(i * d + a, j * d + b)] = col[b * d + a];
                }
            }
        }
    }
    choi
}

/// Row-compressed sparse complex matrix, square.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<C64>,
}

impl SparseOp {
    pub fn zeros(dim: usize) -> Self {
        SparseOp { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        SparseOp { dim, row_ptr: (0..=dim).collect(), cols: (0..dim).collect(), vals: vec![ONE; dim] }
    }

    fn from_rows(dim: usize, rows: Vec<Vec<(usize, C64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, C64)> = Vec::with_capacity(r.len());
            for (cidx, v) in r {
                match merged.last_mut() {
                    Some(last) if last.0 == cidx => last.1 += v,
                    _ => merged.push((cidx, v)),
                }
            }
            for (cidx, v) in merged {
                if v != ZERO {
                    cols.push(cidx);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseOp { dim, row_ptr, cols, vals }
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        let d = m.nrows();
        let rows = (0..d)
            .map(|i| (0..d).filter(|&j| m[(i, j)] != ZERO).map(|j| (j, m[(i, j)])).collect())
            .collect();
        Self::from_rows(d, rows)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    /// See [`embed_dense`] for the index convention.
    pub fn embed(local: &CMatrix, sites: &[usize], dims: &[usize]) -> Self {
        let dim: usize = dims.iter().product();
        let mut strides = Vec::with_capacity(dims.len());
        let mut s = 1;
        for &d in dims {
            strides.push(s);
            s *= d;
        }
        let local_dims: Vec<usize> = sites.iter().map(|&q| dims[q]).collect();
        let ld: usize = local_dims.iter().product();
        assert_eq!(local.nrows(), ld, "local operator dimension mismatch");
        let mut rows = vec![Vec::new(); dim];
        for (r, row) in rows.iter_mut().enumerate() {
            // local row index and the remainder with local digits cleared
            let mut lr = 0;
            let mut mul = 1;
            let mut base = r;
            for (k, &q) in sites.iter().enumerate() {
                let digit = (r / strides[q]) % dims[q];
                lr += digit * mul;
                mul *= local_dims[k];
                base -= digit * strides[q];
            }
            for lc in 0..ld {
                let v = local[(lr, lc)];
                if v == ZERO {
                    continue;
                }
                let mut col = base;
                let mut rem = lc;
                for (k, &q) in sites.iter().enumerate() {
                    col += (rem % local_dims[k]) * strides[q];
                    rem /= local_dims[k];
                }
                row.push((col, v));
            }
        }
        Self::from_rows(dim, rows)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &SparseOp) -> Self {
        assert_eq!(self.dim, other.dim);
        let rows = (0..self.dim)
            .map(|r| {
                let mut v: Vec<(usize, C64)> =
                    (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| (self.cols[k], self.vals[k])).collect();
                v.extend((other.row_ptr[r]..other.row_ptr[r + 1]).map(|k| (other.cols[k], other.vals[k])));
                v
            })
            .collect();
        Self::from_rows(self.dim, rows)
    }

    pub fn adjoint(&self) -> Self {
        let mut rows = vec![Vec::new(); self.dim];
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                rows[self.cols[k]].push((r, self.vals[k].conj()));
            }
        }
        Self::from_rows(self.dim, rows)
    }

    pub fn matmul(&self, other: &SparseOp) -> Self {
        assert_eq!(self.dim, other.dim);
        let rows = (0..self.dim)
            .map(|r| {
                let mut acc = Vec::new();
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    let mid = self.cols[k];
                    for k2 in other.row_ptr[mid]..other.row_ptr[mid + 1] {
                        acc.push((other.cols[k2], self.vals[k] * other.vals[k2]));
                    }
                }
                acc
            })
            .collect();
        Self::from_rows(self.dim, rows)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        let mut d = vec![ZERO; self.dim];
        for (r, slot) in d.iter_mut().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] == r {
                    *slot += self.vals[k];
                }
            }
        }
        d
    }

    pub fn off_diagonal(&self) -> Self {
        let rows = (0..self.dim)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .filter(|&k| self.cols[k] != r)
                    .map(|k| (self.cols[k], self.vals[k]))
                    .collect()
            })
            .collect();
        Self::from_rows(self.dim, rows)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).all(|k| self.cols[k] == r))
    }

    /// At most one entry per row and per column.
    pub fn is_monomial(&self) -> bool {
        let mut seen = vec![false; self.dim];
        for r in 0..self.dim {
            if self.row_ptr[r + 1] - self.row_ptr[r] > 1 {
                return false;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if std::mem::replace(&mut seen[self.cols[k]], true) {
                    return false;
                }
            }
        }
        true
    }

    /// Largest absolute row sum (the induced ∞-norm), an upper bound on the spectral radius.
    pub fn row_sum_norm(&self) -> f64 {
        (0..self.dim)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// out = self · m (column by column).
    pub fn mul_dense_into(&self, m: &CMatrix, out: &mut CMatrix) {
        let d = self.dim;
        assert_eq!(m.nrows(), d);
        assert_eq!((out.nrows(), out.ncols()), (d, m.ncols()));
        assert!(self.cols.iter().all(|&c| c < d));
        let (src_all, dst_all) = (m.as_slice(), out.as_mut_slice());
        for (src, dst) in src_all.chunks_exact(d).zip(dst_all.chunks_exact_mut(d)) {
            for r in 0..d {
                let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
                let mut acc = ZERO;
                for (v, &c) in self.vals[lo..hi].iter().zip(&self.cols[lo..hi]) {
                    // SAFETY: every column index was checked against d above
                    acc += *v * unsafe { *src.get_unchecked(c) };
                }
                dst[r] = acc;
            }
        }
    }

    pub fn mul_dense(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, m.ncols());
        self.mul_dense_into(m, &mut out);
        out
    }

    /// Tr(self · ρ).
    pub fn trace_with(&self, rho: &CMatrix) -> C64 {
        let mut acc = ZERO;
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * rho[(self.cols[k], r)];
            }
        }
        acc
    }

    pub fn hermiticity_error(&self) -> f64 {
        let adj = self.adjoint();
        let diff = self.add(&adj.scale(-ONE));
        diff.vals.iter().fold(0.0, |a, v| a.max(v.norm()))
    }
}

/// Applies a local operator to the rows of `m` (m ← U m), where the operator
/// acts on the listed qubits of a 2^n register (little-endian).
pub fn apply_local_left(m: &mut CMatrix, op: &CMatrix, qubits: &[usize]) {
    let k = qubits.len();
    let ld = 1usize << k;
    assert_eq!(op.nrows(), ld);
    let d = m.nrows();
    let masks: Vec<usize> = qubits.iter().map(|&q| 1usize << q).collect();
    let all: usize = masks.iter().sum();
    let offsets: Vec<usize> = (0..ld)
        .map(|l| (0..k).filter(|&b| l >> b & 1 == 1).map(|b| masks[b]).sum())
        .collect();
    let u: Vec<C64> = (0..ld * ld).map(|i| op[(i / ld, i % ld)]).collect();
    let mut buf = vec![ZERO; ld];
    for j in 0..m.ncols() {
        let mut col = m.column_mut(j);
        let col = col.as_mut_slice();
        for base in 0..d {
            if base & all != 0 {
                continue;
            }
            for l in 0..ld {
                buf[l] = col[base + offsets[l]];
            }
            for r in 0..ld {
                let mut acc = ZERO;
                for l in 0..ld {
                    acc += u[r * ld + l] * buf[l];
                }
                col[base + offsets[r]] = acc;
            }
        }
    }
}

/// m ← m U† for a local operator U on the listed qubits.
pub fn apply_local_right_adjoint(m: &mut CMatrix, op: &CMatrix, qubits: &[usize]) {
    let k = qubits.len();
    let ld = 1usize << k;
    let d = m.ncols();
    let nr = m.nrows();
    let masks: Vec<usize> = qubits.iter().map(|&q| 1usize << q).collect();
    let all: usize = masks.iter().sum();
    let offsets: Vec<usize> = (0..ld)
        .map(|l| (0..k).filter(|&b| l >> b & 1 == 1).map(|b| masks[b]).sum())
        .collect();
    // (m U†)[:, base+off_r] = Σ_l m[:, base+off_l] conj(U[r, l])
    let uc: Vec<C64> = (0..ld * ld).map(|i| op[(i / ld, i % ld)].conj()).collect();
    let data = m.as_mut_slice();
    let mut cols_buf = vec![ZERO; ld * nr];
    for base in 0..d {
        if base & all != 0 {
            continue;
        }
        for l in 0..ld {
            let c0 = (base + offsets[l]) * nr;
            cols_buf[l * nr..(l + 1) * nr].copy_from_slice(&data[c0..c0 + nr]);
        }
        for r in 0..ld {
            let c0 = (base + offsets[r]) * nr;
            let dst = &mut data[c0..c0 + nr];
            dst.iter_mut().for_each(|z| *z = ZERO);
            for l in 0..ld {
                let w = uc[r * ld + l];
                if w == ZERO {
                    continue;
                }
                let src = &cols_buf[l * nr..(l + 1) * nr];
                for (z, s) in dst.iter_mut().zip(src) {
                    *z += w * s;
                }
            }
        }
    }
}

/// m ← U m U† for a local U.
pub fn conjugate_local(m: &mut CMatrix, op: &CMatrix, qubits: &[usize]) {
    apply_local_left(m, op, qubits);
    apply_local_right_adjoint(m, op, qubits);
}

/// Matrix exponential of a dense complex matrix.
pub fn expm(m: &CMatrix) -> CMatrix {
    m.clone().exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (sigma_x(), sigma_y(), sigma_z());
        assert!(max_abs_diff(&(&x * &y), &(&z * I)) < 1e-15);
        let sm = sigma_minus();
        let sm_from_paulis = (&x + &y * I) * c(0.5, 0.0);
        assert!(max_abs_diff(&sm, &sm_from_paulis) < 1e-15);
        assert!(max_abs_diff(&(sigma_plus() * &sm), &excited_projector()) < 1e-15);
    }

    #[test]
    fn embedding_matches_kron() {
        let x = sigma_x();
        let z = sigma_z();
        // qubit 1 is the high bit of a 2-qubit register
        let e = embed_qubits(&x, &[1], 2);
        assert!(max_abs_diff(&e, &kron(&x, &identity(2))) < 1e-15);
        let two = kron(&z, &x); // x on qubit 0, z on qubit 1
        let e2 = embed_qubits(&two, &[0, 1], 3);
        let expected = kron(&identity(2), &two);
        assert!(max_abs_diff(&e2, &expected) < 1e-15);
        // reversed site order flips the local factors
        let e3 = embed_qubits(&two, &[1, 0], 2);
        assert!(max_abs_diff(&e3, &kron(&x, &z)) < 1e-15);
    }

    #[test]
    fn mixed_dimension_embedding() {
        let a = annihilation(2);
        let op = SparseOp::embed(&a, &[1], &[2, 3]).to_dense();
        assert!(max_abs_diff(&op, &kron(&a, &identity(2))) < 1e-15);
    }

    #[test]
    fn local_application_matches_dense() {
        let n = 3;
        let u = kron(&sigma_y(), &(sigma_x() * c(0.3, 0.1) + sigma_z()));
        let mut m = CMatrix::from_fn(8, 8, |i, j| c((i * 8 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.05));
        let full = embed_qubits(&u, &[2, 0], n);
        let expected = &full * &m * full.adjoint();
        conjugate_local(&mut m, &u, &[2, 0]);
        assert!(max_abs_diff(&m, &expected) < 1e-12);
    }

    #[test]
    fn sparse_roundtrip_and_products() {
        let a = SparseOp::embed(&sigma_minus(), &[0], &[2, 2]);
        let b = SparseOp::embed(&sigma_x(), &[1], &[2, 2]);
        let prod = a.matmul(&b).to_dense();
        assert!(max_abs_diff(&prod, &(a.to_dense() * b.to_dense())) < 1e-15);
        assert!(a.is_monomial());
        assert!(!a.is_diagonal());
        let rho = CMatrix::from_fn(4, 4, |i, j| c(i as f64, j as f64));
        let t = b.trace_with(&rho);
        assert!((t - trace(&(b.to_dense() * &rho))).norm() < 1e-14);
    }

    #[test]
    fn superop_matches_direct_action() {
        let l = sigma_minus();
        let rho = mat2(c(0.3, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.7, 0.0));
        let s = dissipator_superop(&l, 0.8);
        let out = unvectorize(&(&s * vectorize(&rho)), 2);
        let ldl = l.adjoint() * &l;
        let direct = (&l * &rho * l.adjoint() - (&ldl * &rho + &rho * &ldl) * c(0.5, 0.0)) * c(0.8, 0.0);
        assert!(max_abs_diff(&out, &direct) < 1e-15);
    }

    #[test]
    fn phase_alignment_ignores_global_phase() {
        let u = sigma_y();
        let v = &u * C64::from_polar(1.0, 0.7);
        assert!(phase_aligned_diff(&v, &u) < 1e-15);
    }

    #[test]
    fn psd_test_detects_negative_eigenvalue() {
        let good = mat2(c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0));
        assert!(is_psd_within(&good, 1e-8));
        let bad = mat2(c(0.5, 0.0), c(0.6, 0.0), c(0.6, 0.0), c(0.5, 0.0));
        assert!(!is_psd_within(&bad, 1e-8));
        assert!((min_eigenvalue(&bad) + 0.1).abs() < 1e-12);
    }
}
