//! Truncated Fock-space linear algebra: ladder operators, tensor
//! embeddings, coherent states, displacements, parity and density matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpec {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
}

impl HilbertSpec {
    pub fn new(dims: &[usize], labels: &[&str]) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d < 2) {
            return Err(Error::DimensionMismatch("every subsystem needs dim ≥ 2".into()));
        }
        if labels.len() != dims.len() {
            return Err(Error::DimensionMismatch("one label per subsystem".into()));
        }
        Ok(Self { dims: dims.to_vec(), labels: labels.iter().map(|s| s.to_string()).collect() })
    }

    /// Cavity A ⊗ cavity B ⊗ control ancilla.
    pub fn cavities_ancilla(da: usize, db: usize) -> Result<Self> {
        Self::new(&[da, db, 2], &["a", "b", "q"])
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Flat index of a product basis state.
    pub fn index(&self, levels: &[usize]) -> usize {
        levels.iter().zip(&self.dims).fold(0, |acc, (&l, &d)| acc * d + l)
    }

    /// Levels of a flat index.
    pub fn levels(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (k, &d) in self.dims.iter().enumerate().rev() {
            out[k] = idx % d;
            idx /= d;
        }
        out
    }
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn annihilation(dim: usize) -> CMat {
    let mut a = CMat::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation(dim: usize) -> CMat {
    annihilation(dim).adjoint()
}

pub fn number(dim: usize) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(dim, (0..dim).map(|n| C64::new(n as f64, 0.0))))
}

pub fn parity(dim: usize) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(
        dim,
        (0..dim).map(|n| if n % 2 == 0 { ONE } else { -ONE }),
    ))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Places a single-site operator into the full space.
pub fn embed(op: &CMat, site: usize, spec: &HilbertSpec) -> Result<CMat> {
    if site >= spec.dims.len() || op.nrows() != spec.dims[site] || op.ncols() != spec.dims[site] {
        return Err(Error::DimensionMismatch(format!(
            "operator {}×{} on site {site} of {:?}",
            op.nrows(),
            op.ncols(),
            spec.dims
        )));
    }
    let mut out = CMat::identity(1, 1);
    for (k, &d) in spec.dims.iter().enumerate() {
        let f = if k == site { op.clone() } else { identity(d) };
        out = kron(&out, &f);
    }
    Ok(out)
}

fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let scaled = a.unscale(2f64.powi(s));
    let mut result = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        result += &term;
        if one_norm(&term) < 1e-18 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// D(β) = exp(βa† − β*a) on the truncated space.
pub fn displacement(beta: C64, dim: usize) -> CMat {
    let a = annihilation(dim);
    let gen = a.adjoint() * beta - &a * beta.conj();
    expm(&gen)
}

/// Untruncated matrix elements ⟨m|D(β)|n⟩ for m < rows, n < cols
/// (Laguerre form), i.e. the exact operator restricted to the low levels.
pub fn displacement_elements(beta: C64, rows: usize, cols: usize) -> CMat {
    let x = beta.norm_sqr();
    let mut out = CMat::zeros(rows, cols);
    let ln_fact: Vec<f64> = {
        let n = rows.max(cols) + 1;
        let mut v = vec![0.0; n];
        for k in 1..n {
            v[k] = v[k - 1] + (k as f64).ln();
        }
        v
    };
    for m in 0..rows {
        for n in 0..cols {
            let (lo, hi) = if m >= n { (n, m) } else { (m, n) };
            let k = hi - lo;
            let lag = gen_laguerre(lo, k as f64, x);
            // √(lo!/hi!) |β|^k e^{-x/2}
            let mag = if x == 0.0 {
                if k == 0 { 1.0 } else { 0.0 }
            } else {
                (0.5 * (ln_fact[lo] - ln_fact[hi]) + k as f64 * beta.norm().ln() - 0.5 * x).exp()
            };
            let phase = if k == 0 || x == 0.0 {
                ONE
            } else {
                let u = beta / beta.norm();
                if m >= n { u.powi(k as i32) } else { (-u.conj()).powi(k as i32) }
            };
            out[(m, n)] = phase * mag * lag;
        }
    }
    out
}

fn gen_laguerre(n: usize, a: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut l0 = 1.0;
    let mut l1 = 1.0 + a - x;
    for k in 1..n {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 + a - x) * l1 - (kf + a) * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// Displaced parity D(β) P D(β)† restricted to the lowest `dim` levels,
/// using the exact identity D(β)PD(β)† = D(2β)P.
pub fn displaced_parity(beta: C64, dim: usize) -> CMat {
    let mut d = displacement_elements(beta * 2.0, dim, dim);
    for n in (1..dim).step_by(2) {
        for m in 0..dim {
            d[(m, n)] = -d[(m, n)];
        }
    }
    d
}

/// D(β) diag(y) D(β)† restricted to the lowest `dim` levels; `y` sets the
/// diagonal in a padded space of length `y.len()`.
pub fn displaced_diagonal(beta: C64, y: &[C64], dim: usize) -> CMat {
    let k = y.len();
    let d = displacement_elements(beta, dim, k);
    let mut dy = d.clone();
    for j in 0..k {
        for m in 0..dim {
            dy[(m, j)] *= y[j];
        }
    }
    dy * d.adjoint()
}

/// Truncated coherent state; fails if the population beyond `dim` exceeds 1e-8.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<CVec> {
    coherent_state_tol(alpha, dim, 1e-8)
}

pub fn coherent_state_tol(alpha: C64, dim: usize, tail_tol: f64) -> Result<CVec> {
    let x = alpha.norm_sqr();
    let mut v = CVec::zeros(dim);
    let mut amp = C64::new((-0.5 * x).exp(), 0.0);
    let mut kept = 0.0;
    for n in 0..dim {
        if n > 0 {
            amp = amp * alpha / (n as f64).sqrt();
        }
        v[n] = amp;
        kept += amp.norm_sqr();
    }
    let tail = (1.0 - kept).max(0.0);
    if tail > tail_tol {
        return Err(Error::TruncationError(format!(
            "coherent state |α|² = {x:.3} leaves {tail:.2e} beyond dim {dim}"
        )));
    }
    let norm = v.norm();
    Ok(v.unscale(norm))
}

pub fn fock_state(n: usize, dim: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[n] = ONE;
    v
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    a.kronecker(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub rho: CMat,
    pub spec: HilbertSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl QuantumState {
    pub fn from_pure(psi: &CVec, spec: &HilbertSpec) -> Result<Self> {
        if psi.len() != spec.total() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for space of dim {}",
                psi.len(),
                spec.total()
            )));
        }
        let psi = psi.unscale(psi.norm());
        Ok(Self { rho: &psi * psi.adjoint(), spec: spec.clone() })
    }

    pub fn from_rho(rho: CMat, spec: &HilbertSpec) -> Result<Self> {
        if rho.nrows() != spec.total() || rho.ncols() != spec.total() {
            return Err(Error::DimensionMismatch("density matrix shape".into()));
        }
        Ok(Self { rho, spec: spec.clone() })
    }

    /// Product of per-site pure states.
    pub fn product(states: &[CVec], spec: &HilbertSpec) -> Result<Self> {
        let mut psi = CVec::from_element(1, ONE);
        for s in states {
            psi = kron_vec(&psi, s);
        }
        Self::from_pure(&psi, spec)
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn purity(&self) -> f64 {
        let mut s = 0.0;
        for v in self.rho.iter() {
            s += v.norm_sqr();
        }
        s
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.rho.nrows();
        let mut e: f64 = 0.0;
        for i in 0..d {
            for j in 0..=i {
                e = e.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::InvalidInput(format!("density matrix not Hermitian ({herm:.1e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("trace {tr}")));
        }
        let ev = self.min_eigenvalue();
        if ev < -1e-8 {
            return Err(Error::InvalidInput(format!("negative eigenvalue {ev:.2e}")));
        }
        Ok(())
    }

    pub fn expect(&self, op: &CMat) -> C64 {
        let d = self.rho.nrows();
        let mut s = ZERO;
        for i in 0..d {
            for j in 0..d {
                s += self.rho[(i, j)] * op[(j, i)];
            }
        }
        s
    }

    /// Reduced state on the listed sites (in their original order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<QuantumState> {
        let dims = &self.spec.dims;
        if keep.iter().any(|&k| k >= dims.len()) {
            return Err(Error::DimensionMismatch("site out of range".into()));
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let kdims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
        let klabels: Vec<&str> = keep.iter().map(|&k| self.spec.labels[k].as_str()).collect();
        let kspec = HilbertSpec::new(&kdims, &klabels)?;
        let dk = kspec.total();
        let mut out = CMat::zeros(dk, dk);
        let d = self.spec.total();
        let idx_levels: Vec<Vec<usize>> = (0..d).map(|i| self.spec.levels(i)).collect();
        let reduced: Vec<usize> = idx_levels
            .iter()
            .map(|l| keep.iter().fold(0, |acc, &k| acc * dims[k] + l[k]))
            .collect();
        let traced_key: Vec<Vec<usize>> = idx_levels
            .iter()
            .map(|l| (0..dims.len()).filter(|k| !keep.contains(k)).map(|k| l[k]).collect())
            .collect();
        for i in 0..d {
            for j in 0..d {
                if traced_key[i] == traced_key[j] {
                    out[(reduced[i], reduced[j])] += self.rho[(i, j)];
                }
            }
        }
        QuantumState::from_rho(out, &kspec)
    }

    pub fn fidelity_pure(&self, psi: &CVec) -> f64 {
        (psi.adjoint() * &self.rho * psi)[(0, 0)].re
    }

    pub fn snapshot(&self) -> StateSnapshot {
        let d = self.rho.nrows();
        StateSnapshot {
            dims: self.spec.dims.clone(),
            labels: self.spec.labels.clone(),
            re: (0..d).map(|i| (0..d).map(|j| self.rho[(i, j)].re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| self.rho[(i, j)].im).collect()).collect(),
        }
    }

    pub fn from_snapshot(s: &StateSnapshot) -> Result<Self> {
        let labels: Vec<&str> = s.labels.iter().map(|x| x.as_str()).collect();
        let spec = HilbertSpec::new(&s.dims, &labels)?;
        let d = spec.total();
        if s.re.len() != d || s.im.len() != d {
            return Err(Error::DimensionMismatch("snapshot shape".into()));
        }
        let rho = CMat::from_fn(d, d, |i, j| C64::new(s.re[i][j], s.im[i][j]));
        Self::from_rho(rho, &spec)
    }
}

/// Compressed sparse-row operator used by the master-equation integrator.
#[derive(Debug, Clone)]
pub struct SparseOp {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<C64>,
}

impl SparseOp {
    pub fn from_dense(m: &CMat, tol: f64) -> Self {
        let dim = m.nrows();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..dim {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.norm() > tol {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| self.cols[self.row_ptr[i]..self.row_ptr[i + 1]].iter().all(|&j| j == i))
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.vals[k]))
        })
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (i, j, v) in self.entries() {
            m[(i, j)] += v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_elements() {
        let a = annihilation(6);
        for n in 0..5 {
            assert!((a[(n, n + 1)].re - ((n + 1) as f64).sqrt()).abs() < 1e-15);
        }
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        for n in 0..5 {
            assert!((comm[(n, n)] - ONE).norm() < 1e-14);
        }
    }

    #[test]
    fn analytic_displacement_matches_expm() {
        let beta = C64::new(0.7, -0.4);
        let big = displacement(beta, 60);
        let small = displacement_elements(beta, 12, 12);
        for i in 0..12 {
            for j in 0..12 {
                assert!((big[(i, j)] - small[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn index_round_trip() {
        let s = HilbertSpec::cavities_ancilla(4, 3).unwrap();
        for i in 0..s.total() {
            assert_eq!(s.index(&s.levels(i)), i);
        }
    }
}
