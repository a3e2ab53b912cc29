//! Rotating-frame Hamiltonian assembly and open-system evolution.
//!
//! The integrator works in the interaction picture of the diagonal part of
//! the Hamiltonian (dispersive, Kerr and cross-Kerr terms), so only the
//! exchange and drive terms limit the step size. All operators are kept in
//! compressed sparse-row form; the density matrix is stored column-major.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::dressed_system::{Decoherence, SystemModel};
use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, embed, identity, CMat, CVec, HilbertSpec, QuantumState, SparseOp, C64, I, ONE, ZERO,
};
use crate::units::{khz, mhz};

/// Coefficients of the cavity–ancilla Hamiltonian. Frequencies are in MHz
/// (dispersive, exchange, drive) or kHz (Kerr-type), angles in radians.
/// A zero coefficient switches the term off.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerms {
    /// Dispersive shifts of each cavity conditioned on the simulated ancilla.
    pub chi_a: f64,
    pub chi_b: f64,
    pub k_a: f64,
    pub k_b: f64,
    pub chi_ab: f64,
    pub chi_prime_bc: f64,
    pub g_bs: f64,
    pub theta: f64,
    /// Pump detuning from the bare difference frequency.
    pub delta: f64,
    /// Ancilla Rabi rate Ω_R, entering as (Ω_R/2)σx.
    pub rabi: f64,
    /// Ancilla drive detuning, entering as −δ_q|e⟩⟨e|.
    pub rabi_detuning: f64,
}

impl HamiltonianTerms {
    /// Idle terms for a device with the control ancilla on cavity B.
    pub fn from_model(model: &SystemModel) -> Self {
        Self {
            chi_a: 0.0,
            chi_b: model.chi_b,
            k_a: model.k_a,
            k_b: model.k_b,
            chi_ab: model.chi_ab,
            chi_prime_bc: model.chi_prime_bc,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = [
            self.chi_a, self.chi_b, self.k_a, self.k_b, self.chi_ab, self.chi_prime_bc, self.g_bs, self.theta,
            self.delta, self.rabi, self.rabi_detuning,
        ];
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("Hamiltonian coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Diagonal energies (rad/μs) of the idle part, excluding the pump detuning.
    pub fn idle_energies(&self, spec: &HilbertSpec) -> Result<Vec<f64>> {
        check_spec(spec)?;
        let ancilla = spec.dims.len() == 3;
        Ok((0..spec.total())
            .map(|i| {
                let l = spec.levels(i);
                let (na, nb) = (l[0] as f64, l[1] as f64);
                let e = if ancilla { (l[2] == 1) as u8 as f64 } else { 0.0 };
                mhz(self.chi_a) * na * e
                    + mhz(self.chi_b) * nb * e
                    + khz(self.k_a) * 0.5 * na * (na - 1.0)
                    + khz(self.k_b) * 0.5 * nb * (nb - 1.0)
                    + khz(self.chi_ab) * na * nb
                    + khz(self.chi_prime_bc) * nb * (nb - 1.0) * e
                    - mhz(self.rabi_detuning) * e
            })
            .collect())
    }
}

fn check_spec(spec: &HilbertSpec) -> Result<()> {
    if spec.dims.len() != 2 && spec.dims.len() != 3 {
        return Err(Error::DimensionMismatch("expected (cavity A, cavity B[, ancilla])".into()));
    }
    if spec.dims.len() == 3 && spec.dims[2] != 2 {
        return Err(Error::DimensionMismatch("ancilla must be a qubit".into()));
    }
    Ok(())
}

fn a_op(spec: &HilbertSpec) -> Result<CMat> {
    embed(&annihilation(spec.dims[0]), 0, spec)
}

fn b_op(spec: &HilbertSpec) -> Result<CMat> {
    embed(&annihilation(spec.dims[1]), 1, spec)
}

fn sigma_minus(spec: &HilbertSpec) -> Result<CMat> {
    let mut s = CMat::zeros(2, 2);
    s[(0, 1)] = ONE;
    embed(&s, 2, spec)
}

/// Static Hamiltonian (rad/μs) in the frame co-rotating with the pump:
/// idle terms + g(e^{iθ}a†b + h.c.) + Δa†a + (Ω_R/2)σx.
pub fn build_hamiltonian(terms: &HamiltonianTerms, spec: &HilbertSpec) -> Result<CMat> {
    terms.validate()?;
    let energies = terms.idle_energies(spec)?;
    let d = spec.total();
    let mut h = CMat::zeros(d, d);
    for (i, e) in energies.iter().enumerate() {
        let na = spec.levels(i)[0] as f64;
        h[(i, i)] = C64::new(e + mhz(terms.delta) * na, 0.0);
    }
    if terms.g_bs != 0.0 {
        let adb = a_op(spec)?.adjoint() * b_op(spec)?;
        let c = C64::from_polar(mhz(terms.g_bs), terms.theta);
        h += &adb * c + adb.adjoint() * c.conj();
    }
    if terms.rabi != 0.0 {
        if spec.dims.len() != 3 {
            return Err(Error::DimensionMismatch("ancilla drive needs an ancilla".into()));
        }
        let sm = sigma_minus(spec)?;
        h += (&sm + sm.adjoint()) * C64::new(0.5 * mhz(terms.rabi), 0.0);
    }
    Ok(h)
}

/// Decay and pure-dephasing rates (1/μs) for cavity A, cavity B and the ancilla.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CollapseSet {
    pub kappa_a: f64,
    pub kappa_phi_a: f64,
    pub kappa_b: f64,
    pub kappa_phi_b: f64,
    pub gamma_q: f64,
    pub gamma_phi_q: f64,
}

fn rate(t: f64) -> f64 {
    if t.is_finite() {
        1.0 / t
    } else {
        0.0
    }
}

impl CollapseSet {
    pub fn none() -> Self {
        Self::default()
    }

    /// Rates for the two cavities and cavity B's ancilla (the cSWAP control).
    pub fn from_decoherence(d: &Decoherence) -> Self {
        Self {
            kappa_a: rate(d.t1_a),
            kappa_phi_a: rate(d.tphi_a),
            kappa_b: rate(d.t1_b),
            kappa_phi_b: rate(d.tphi_b),
            gamma_q: rate(d.t1_qb),
            gamma_phi_q: rate(d.tphi_qb),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = [self.kappa_a, self.kappa_phi_a, self.kappa_b, self.kappa_phi_b, self.gamma_q, self.gamma_phi_q];
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("collapse rates must be finite and ≥ 0".into()));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        [self.kappa_a, self.kappa_phi_a, self.kappa_b, self.kappa_phi_b, self.gamma_q, self.gamma_phi_q]
            .iter()
            .all(|&x| x == 0.0)
    }

    /// Collapse operators √κ·a, √(2κ_φ)·n, √γ·σ₋, √(2γ_φ)|e⟩⟨e|.
    pub fn operators(&self, spec: &HilbertSpec) -> Result<Vec<CMat>> {
        self.validate()?;
        check_spec(spec)?;
        let mut ops = Vec::new();
        let a = a_op(spec)?;
        let b = b_op(spec)?;
        if self.kappa_a > 0.0 {
            ops.push(&a * C64::new(self.kappa_a.sqrt(), 0.0));
        }
        if self.kappa_phi_a > 0.0 {
            ops.push(a.adjoint() * &a * C64::new((2.0 * self.kappa_phi_a).sqrt(), 0.0));
        }
        if self.kappa_b > 0.0 {
            ops.push(&b * C64::new(self.kappa_b.sqrt(), 0.0));
        }
        if self.kappa_phi_b > 0.0 {
            ops.push(b.adjoint() * &b * C64::new((2.0 * self.kappa_phi_b).sqrt(), 0.0));
        }
        if spec.dims.len() == 3 {
            let sm = sigma_minus(spec)?;
            if self.gamma_q > 0.0 {
                ops.push(&sm * C64::new(self.gamma_q.sqrt(), 0.0));
            }
            if self.gamma_phi_q > 0.0 {
                ops.push(sm.adjoint() * &sm * C64::new((2.0 * self.gamma_phi_q).sqrt(), 0.0));
            }
        } else if self.gamma_q > 0.0 || self.gamma_phi_q > 0.0 {
            return Err(Error::DimensionMismatch("ancilla rates given without an ancilla".into()));
        }
        Ok(ops)
    }
}

/// Exchange pulse g(t)e^{i(θ + δ(t − t₀))} with cosine ramps. Rates in rad/μs,
/// times in μs; `duration` includes both ramps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    pub amplitude: f64,
    pub theta: f64,
    pub detuning: f64,
    pub t_start: f64,
    pub duration: f64,
    pub ramp: f64,
}

impl PulseEnvelope {
    /// A drive that is on from `t_start` onwards with no ramps.
    pub fn continuous(amplitude: f64, theta: f64, detuning: f64, t_start: f64) -> Self {
        Self { amplitude, theta, detuning, t_start, duration: f64::INFINITY, ramp: 0.0 }
    }

    pub fn shape(&self, t: f64) -> f64 {
        let s = t - self.t_start;
        if s < 0.0 || s > self.duration {
            return 0.0;
        }
        if self.ramp > 0.0 {
            if s < self.ramp {
                return 0.5 * (1.0 - (std::f64::consts::PI * s / self.ramp).cos());
            }
            let r = self.duration - s;
            if r < self.ramp {
                return 0.5 * (1.0 - (std::f64::consts::PI * r / self.ramp).cos());
            }
        }
        1.0
    }

    pub fn coefficient(&self, t: f64) -> C64 {
        let g = self.amplitude * self.shape(t);
        if g == 0.0 {
            return ZERO;
        }
        C64::from_polar(g, self.theta + self.detuning * (t - self.t_start))
    }

    /// ∫g(t)dt over the pulse.
    pub fn area(&self) -> f64 {
        self.amplitude * (self.duration - self.ramp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Constant(C64),
    Pulse(PulseEnvelope),
}

impl Coefficient {
    fn at(&self, t: f64) -> C64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Pulse(p) => p.coefficient(t),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Static,
    Drive(usize, bool),
}

#[derive(Debug, Clone, Copy)]
struct Contribution {
    pos: usize,
    row: usize,
    col: usize,
    base: C64,
    source: Source,
}

/// Time-dependent Lindblad generator H(t) = diag(E) + Σ c_k(t)A_k + h.c.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: HilbertSpec,
    energies: Vec<f64>,
    drives: Vec<(SparseOp, Coefficient)>,
    jumps: Vec<SparseOp>,
    diag_jumps: Vec<Vec<C64>>,
    k_dense: CMat,
    // Assembled by `prepare`.
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    contribs: Vec<Contribution>,
    jump_sum: Option<Vec<C64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    /// Embedded Dormand–Prince 5(4) pair with mixed error tolerance.
    Adaptive { rtol: f64, atol: f64 },
    /// Classical fourth-order Runge–Kutta at a fixed step (μs).
    FixedRk4 { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub method: Method,
    /// Initial step, μs.
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { method: Method::Adaptive { rtol: 1e-9, atol: 1e-9 }, h_init: 1e-3, max_steps: 10_000_000 }
    }
}

impl IntegratorOptions {
    pub fn adaptive(tol: f64) -> Self {
        Self { method: Method::Adaptive { rtol: tol, atol: tol }, ..Self::default() }
    }

    /// Fixed step in ns.
    pub fn fixed_ns(dt_ns: f64) -> Self {
        Self { method: Method::FixedRk4 { dt: dt_ns * 1e-3 }, ..Self::default() }
    }
}

impl Generator {
    pub fn new(spec: &HilbertSpec, energies: Vec<f64>) -> Result<Self> {
        let d = spec.total();
        if energies.len() != d {
            return Err(Error::DimensionMismatch("one energy per basis state".into()));
        }
        let mut g = Self {
            spec: spec.clone(),
            energies,
            drives: Vec::new(),
            jumps: Vec::new(),
            diag_jumps: Vec::new(),
            k_dense: CMat::zeros(d, d),
            row_ptr: Vec::new(),
            cols: Vec::new(),
            contribs: Vec::new(),
            jump_sum: None,
        };
        g.prepare();
        Ok(g)
    }

    /// Splits a static Hermitian matrix into diagonal energies and an
    /// off-diagonal constant drive.
    pub fn from_hamiltonian(h: &CMat, spec: &HilbertSpec) -> Result<Self> {
        let d = spec.total();
        if h.nrows() != d || h.ncols() != d {
            return Err(Error::DimensionMismatch("Hamiltonian shape".into()));
        }
        let energies = (0..d).map(|i| h[(i, i)].re).collect();
        let mut g = Self::new(spec, energies)?;
        let upper = CMat::from_fn(d, d, |i, j| if j > i { h[(i, j)] } else { ZERO });
        let op = SparseOp::from_dense(&upper, 0.0);
        if op.nnz() > 0 {
            g.add_drive(op, Coefficient::Constant(ONE));
        }
        Ok(g)
    }

    /// Idle terms in the frame of the undriven cavities plus an exchange drive
    /// a†b whose coefficient is the given pulse (if any), and the ancilla drive.
    pub fn lab_frame(terms: &HamiltonianTerms, spec: &HilbertSpec, pulse: Option<PulseEnvelope>) -> Result<Self> {
        terms.validate()?;
        let mut g = Self::new(spec, terms.idle_energies(spec)?)?;
        if let Some(p) = pulse {
            let adb = a_op(spec)?.adjoint() * b_op(spec)?;
            g.add_drive(SparseOp::from_dense(&adb, 0.0), Coefficient::Pulse(p));
        }
        if terms.rabi != 0.0 {
            let sp = sigma_minus(spec)?.adjoint();
            g.add_drive(SparseOp::from_dense(&sp, 0.0), Coefficient::Constant(C64::new(0.5 * mhz(terms.rabi), 0.0)));
        }
        Ok(g)
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Adds c(t)·A + h.c. to the Hamiltonian.
    pub fn add_drive(&mut self, op: SparseOp, coeff: Coefficient) {
        self.drives.push((op, coeff));
        self.prepare();
    }

    pub fn set_collapse(&mut self, collapse: &CollapseSet) -> Result<()> {
        let ops = collapse.operators(&self.spec)?;
        self.set_collapse_ops(&ops)
    }

    pub fn set_collapse_ops(&mut self, ops: &[CMat]) -> Result<()> {
        let d = self.spec.total();
        self.jumps.clear();
        self.diag_jumps.clear();
        self.k_dense = CMat::zeros(d, d);
        for l in ops {
            if l.nrows() != d || l.ncols() != d {
                return Err(Error::DimensionMismatch("collapse operator shape".into()));
            }
            self.k_dense += l.adjoint() * l;
            let sp = SparseOp::from_dense(l, 0.0);
            if sp.is_diagonal() {
                self.diag_jumps.push((0..d).map(|i| l[(i, i)]).collect());
            } else {
                self.jumps.push(sp);
            }
        }
        self.prepare();
        Ok(())
    }

    pub fn has_dissipation(&self) -> bool {
        !self.jumps.is_empty() || !self.diag_jumps.is_empty()
    }

    fn prepare(&mut self) {
        let d = self.spec.total();
        // (row, col, base, source) before compression
        let mut raw: Vec<(usize, usize, C64, Source)> = Vec::new();
        for i in 0..d {
            raw.push((i, i, ZERO, Source::Static));
        }
        for i in 0..d {
            for j in 0..d {
                let k = self.k_dense[(i, j)];
                if k != ZERO {
                    raw.push((i, j, k * C64::new(-0.5, 0.0), Source::Static));
                }
            }
        }
        for (n, (op, _)) in self.drives.iter().enumerate() {
            for (i, j, v) in op.entries() {
                raw.push((i, j, v * -I, Source::Drive(n, false)));
                raw.push((j, i, v.conj() * -I, Source::Drive(n, true)));
            }
        }
        let mut per_row: Vec<Vec<usize>> = vec![Vec::new(); d];
        for (i, j, _, _) in &raw {
            per_row[*i].push(*j);
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for r in per_row.iter_mut() {
            r.sort_unstable();
            r.dedup();
            cols.extend_from_slice(r);
            row_ptr.push(cols.len());
        }
        let contribs = raw
            .into_iter()
            .filter(|(_, _, v, _)| *v != ZERO)
            .map(|(row, col, base, source)| {
                let slice = &cols[row_ptr[row]..row_ptr[row + 1]];
                let pos = row_ptr[row] + slice.binary_search(&col).expect("pattern entry");
                Contribution { pos, row, col, base, source }
            })
            .collect();
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.contribs = contribs;
        self.jump_sum = if self.diag_jumps.is_empty() {
            None
        } else {
            let mut m = vec![ZERO; d * d];
            for l in &self.diag_jumps {
                for c in 0..d {
                    for r in 0..d {
                        m[c * d + r] += l[r] * l[c].conj();
                    }
                }
            }
            Some(m)
        };
    }

    fn phases(&self, tau: f64) -> Vec<C64> {
        self.energies.iter().map(|e| C64::from_polar(1.0, e * tau)).collect()
    }

    /// Values of −iV_I(τ) − ½K_I(τ) on the stored pattern.
    fn effective_values(&self, t0: f64, tau: f64, ph: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|v| *v = ZERO);
        let coeffs: Vec<C64> = self.drives.iter().map(|(_, c)| c.at(t0 + tau)).collect();
        for c in &self.contribs {
            let scale = match c.source {
                Source::Static => ONE,
                Source::Drive(n, false) => coeffs[n],
                Source::Drive(n, true) => coeffs[n].conj(),
            };
            if scale == ZERO {
                continue;
            }
            let phase = if c.row == c.col { ONE } else { ph[c.row] * ph[c.col].conj() };
            out[c.pos] += c.base * scale * phase;
        }
    }

    fn jump_values(op: &SparseOp, ph: &[C64]) -> Vec<C64> {
        op.entries().map(|(i, j, v)| v * ph[i] * ph[j].conj()).collect()
    }

    fn rhs_rho(&self, t0: f64, tau: f64, rho: &[C64], out: &mut [C64], work: &mut Work) {
        let d = self.spec.total();
        let ph = self.phases(tau);
        self.effective_values(t0, tau, &ph, &mut work.vals);
        csr_mul(d, &self.row_ptr, &self.cols, &work.vals, rho, &mut work.x);
        // out = X + X†
        for c in 0..d {
            for r in 0..d {
                out[c * d + r] = work.x[c * d + r] + work.x[r * d + c].conj();
            }
        }
        for op in &self.jumps {
            let vals = Self::jump_values(op, &ph);
            csr_mul(d, &op.row_ptr, &op.cols, &vals, rho, &mut work.x);
            adjoint_into(d, &work.x, &mut work.y);
            csr_mul(d, &op.row_ptr, &op.cols, &vals, &work.y, &mut work.x);
            for (o, x) in out.iter_mut().zip(&work.x) {
                *o += x;
            }
        }
        if let Some(m) = &self.jump_sum {
            for ((o, m), r) in out.iter_mut().zip(m).zip(rho) {
                *o += m * r;
            }
        }
    }

    fn rhs_psi(&self, t0: f64, tau: f64, psi: &[C64], out: &mut [C64], work: &mut Work) {
        let d = self.spec.total();
        let ph = self.phases(tau);
        self.effective_values(t0, tau, &ph, &mut work.vals);
        csr_mul(d, &self.row_ptr, &self.cols, &work.vals, psi, out);
        let _ = d;
    }

    fn to_interaction_rho(&self, rho: &CMat, tau: f64, forward: bool) -> Vec<C64> {
        let d = self.spec.total();
        let ph = self.phases(tau);
        let mut v = vec![ZERO; d * d];
        for c in 0..d {
            for r in 0..d {
                let p = ph[r].conj() * ph[c];
                v[c * d + r] = rho[(r, c)] * if forward { p } else { p.conj() };
            }
        }
        v
    }

    fn from_interaction_rho(&self, v: &[C64], tau: f64) -> CMat {
        let d = self.spec.total();
        let ph = self.phases(tau);
        CMat::from_fn(d, d, |r, c| v[c * d + r] * ph[r].conj() * ph[c])
    }

    /// Evolves a density matrix from `t0` to `t1` (μs).
    pub fn propagate_rho(&self, rho: &CMat, t0: f64, t1: f64, opts: &IntegratorOptions) -> Result<CMat> {
        let mut out = None;
        self.propagate_rho_sampled(rho, t0, &[t1], opts, |_, r| out = Some(r.clone()))?;
        Ok(out.unwrap_or_else(|| rho.clone()))
    }

    /// Evolves and calls `observe(t, ρ(t))` at each requested time (ascending, ≥ t0).
    pub fn propagate_rho_sampled<F>(
        &self,
        rho: &CMat,
        t0: f64,
        times: &[f64],
        opts: &IntegratorOptions,
        mut observe: F,
    ) -> Result<()>
    where
        F: FnMut(f64, &CMat),
    {
        let d = self.spec.total();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch("density matrix shape".into()));
        }
        let mut y = self.to_interaction_rho(rho, 0.0, true);
        let mut work = Work::new(d, d * d, self.cols.len());
        let mut tau = 0.0;
        let mut h = opts.h_init;
        for &t in times {
            let target = t - t0;
            if target < tau - 1e-15 {
                return Err(Error::InvalidInput("sample times must be ascending and ≥ t0".into()));
            }
            integrate(
                |s, y, dy, w: &mut Work| self.rhs_rho(t0, s, y, dy, w),
                &mut y,
                tau,
                target,
                opts,
                &mut h,
                &mut work,
            )?;
            tau = target.max(tau);
            observe(t, &self.from_interaction_rho(&y, tau));
        }
        Ok(())
    }

    /// Closed-system evolution of a state vector; fails if collapse operators are set.
    pub fn propagate_psi(&self, psi: &CVec, t0: f64, t1: f64, opts: &IntegratorOptions) -> Result<CVec> {
        if self.has_dissipation() {
            return Err(Error::InvalidInput("pure-state evolution with collapse operators".into()));
        }
        let d = self.spec.total();
        if psi.len() != d {
            return Err(Error::DimensionMismatch("state vector length".into()));
        }
        if t1 < t0 {
            return Err(Error::InvalidInput("t1 < t0".into()));
        }
        let mut y: Vec<C64> = psi.iter().cloned().collect();
        let mut work = Work::new(d, d, self.cols.len());
        let mut h = opts.h_init;
        integrate(|s, y, dy, w: &mut Work| self.rhs_psi(t0, s, y, dy, w), &mut y, 0.0, t1 - t0, opts, &mut h, &mut work)?;
        let ph = self.phases(t1 - t0);
        Ok(CVec::from_fn(d, |i, _| y[i] * ph[i].conj()))
    }
}

struct Work {
    vals: Vec<C64>,
    x: Vec<C64>,
    y: Vec<C64>,
}

impl Work {
    fn new(_d: usize, n: usize, nnz: usize) -> Self {
        Self { vals: vec![ZERO; nnz], x: vec![ZERO; n], y: vec![ZERO; n] }
    }
}

/// out = S·X for column-major X with `n/d` columns.
fn csr_mul(d: usize, row_ptr: &[usize], cols: &[usize], vals: &[C64], x: &[C64], out: &mut [C64]) {
    let ncols = x.len() / d;
    for c in 0..ncols {
        let xc = &x[c * d..(c + 1) * d];
        let oc = &mut out[c * d..(c + 1) * d];
        for r in 0..d {
            let mut s = ZERO;
            for k in row_ptr[r]..row_ptr[r + 1] {
                s += vals[k] * xc[cols[k]];
            }
            oc[r] = s;
        }
    }
}

fn adjoint_into(d: usize, x: &[C64], out: &mut [C64]) {
    for c in 0..d {
        for r in 0..d {
            out[r * d + c] = x[c * d + r].conj();
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(y: &[C64], h: f64, terms: &[(f64, &[C64])], out: &mut [C64]) {
    for i in 0..y.len() {
        let mut s = ZERO;
        for (c, k) in terms {
            if *c != 0.0 {
                s += k[i] * *c;
            }
        }
        out[i] = y[i] + s * h;
    }
}

fn integrate<F>(
    mut f: F,
    y: &mut Vec<C64>,
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
    h_state: &mut f64,
    work: &mut Work,
) -> Result<()>
where
    F: FnMut(f64, &[C64], &mut [C64], &mut Work),
{
    if t1 <= t0 {
        return Ok(());
    }
    let n = y.len();
    match opts.method {
        Method::FixedRk4 { dt } => {
            if !(dt > 0.0) {
                return Err(Error::InvalidInput("fixed step must be positive".into()));
            }
            let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
            let h = (t1 - t0) / steps as f64;
            let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
                (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
            for s in 0..steps {
                let t = t0 + s as f64 * h;
                f(t, y, &mut k1, work);
                combine(y, h, &[(0.5, &k1)], &mut tmp);
                f(t + 0.5 * h, &tmp, &mut k2, work);
                combine(y, h, &[(0.5, &k2)], &mut tmp);
                f(t + 0.5 * h, &tmp, &mut k3, work);
                combine(y, h, &[(1.0, &k3)], &mut tmp);
                f(t + h, &tmp, &mut k4, work);
                combine(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)], &mut tmp);
                std::mem::swap(y, &mut tmp);
            }
            Ok(())
        }
        Method::Adaptive { rtol, atol } => {
            if !(rtol > 0.0 && atol > 0.0) {
                return Err(Error::InvalidInput("tolerances must be positive".into()));
            }
            let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![ZERO; n]).collect();
            let mut tmp = vec![ZERO; n];
            let mut ynew = vec![ZERO; n];
            let mut t = t0;
            let mut h = h_state.min(t1 - t0).max(1e-12);
            f(t, y, &mut k[0], work);
            let mut steps = 0;
            while t < t1 {
                steps += 1;
                if steps > opts.max_steps {
                    return Err(Error::StepSizeUnderflow { t, h });
                }
                let last = t + h >= t1;
                if last {
                    h = t1 - t;
                }
                let (k0, rest) = k.split_at_mut(1);
                let k0 = &k0[0];
                {
                    let (k1, rest) = rest.split_at_mut(1);
                    combine(y, h, &[(A21, k0)], &mut tmp);
                    f(t + 0.2 * h, &tmp, &mut k1[0], work);
                    let (k2, rest) = rest.split_at_mut(1);
                    combine(y, h, &[(A31, k0), (A32, &k1[0])], &mut tmp);
                    f(t + 0.3 * h, &tmp, &mut k2[0], work);
                    let (k3, rest) = rest.split_at_mut(1);
                    combine(y, h, &[(A41, k0), (A42, &k1[0]), (A43, &k2[0])], &mut tmp);
                    f(t + 0.8 * h, &tmp, &mut k3[0], work);
                    let (k4, rest) = rest.split_at_mut(1);
                    combine(y, h, &[(A51, k0), (A52, &k1[0]), (A53, &k2[0]), (A54, &k3[0])], &mut tmp);
                    f(t + 8.0 / 9.0 * h, &tmp, &mut k4[0], work);
                    let (k5, k6) = rest.split_at_mut(1);
                    combine(y, h, &[(A61, k0), (A62, &k1[0]), (A63, &k2[0]), (A64, &k3[0]), (A65, &k4[0])], &mut tmp);
                    f(t + h, &tmp, &mut k5[0], work);
                    combine(y, h, &[(B1, k0), (B3, &k2[0]), (B4, &k3[0]), (B5, &k4[0]), (B6, &k5[0])], &mut ynew);
                    f(t + h, &ynew, &mut k6[0], work);
                }
                let mut err: f64 = 0.0;
                for i in 0..n {
                    let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7)
                        * h;
                    let sc = atol + rtol * y[i].norm().max(ynew[i].norm());
                    err = err.max(e.norm() / sc);
                }
                if err <= 1.0 {
                    t = if last { t1 } else { t + h };
                    std::mem::swap(y, &mut ynew);
                    k.swap(0, 6);
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if !last {
                        h *= fac;
                        *h_state = h;
                    } else {
                        *h_state = (*h_state).max(h);
                    }
                } else {
                    h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                    if h < 1e-12 * t.abs().max(1.0) {
                        return Err(Error::StepSizeUnderflow { t, h });
                    }
                }
            }
            Ok(())
        }
    }
}

/// exp(−iHt)|ψ⟩ applied to a state through the eigendecomposition of H.
pub fn evolve_unitary(state: &QuantumState, h: &CMat, t: f64) -> Result<QuantumState> {
    let d = state.spec.total();
    if h.nrows() != d || h.ncols() != d {
        return Err(Error::DimensionMismatch("Hamiltonian shape".into()));
    }
    if t < 0.0 {
        return Err(Error::InvalidInput("negative evolution time".into()));
    }
    let u = unitary(h, t);
    QuantumState::from_rho(&u * &state.rho * u.adjoint(), &state.spec)
}

/// exp(−iHt) for Hermitian H.
pub fn unitary(h: &CMat, t: f64) -> CMat {
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = CMat::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
    v * phases * v.adjoint()
}

/// Lindblad evolution under a static Hamiltonian.
pub fn evolve_lindblad(
    state: &QuantumState,
    h: &CMat,
    collapse: &CollapseSet,
    t: f64,
    opts: &IntegratorOptions,
) -> Result<QuantumState> {
    if t < 0.0 {
        return Err(Error::InvalidInput("negative evolution time".into()));
    }
    let mut g = Generator::from_hamiltonian(h, &state.spec)?;
    g.set_collapse(collapse)?;
    let rho = g.propagate_rho(&state.rho, 0.0, t, opts)?;
    QuantumState::from_rho(rho, &state.spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Su2Solution {
    pub omega: f64,
    pub contrast: f64,
    pub axis: [f64; 3],
}

/// Rotation rate Ω = √(g² + Δ²/4), contrast g²/Ω² and axis (g cosθ, g sinθ, Δ/2)/Ω.
pub fn su2_solution(g_bs: f64, theta: f64, delta: f64) -> Su2Solution {
    let omega = (g_bs * g_bs + 0.25 * delta * delta).sqrt();
    if omega == 0.0 {
        return Su2Solution { omega, contrast: 0.0, axis: [0.0, 0.0, 1.0] };
    }
    Su2Solution {
        omega,
        contrast: g_bs * g_bs / (omega * omega),
        axis: [g_bs * theta.cos() / omega, g_bs * theta.sin() / omega, 0.5 * delta / omega],
    }
}

/// Heisenberg propagator acting on (a, b) under Δa†a + g(e^{iθ}a†b + h.c.):
/// a(t) = U₀₀a + U₀₁b, b(t) = U₁₀a + U₁₁b. Rates in rad/μs, t in μs.
pub fn heisenberg_propagator(g_bs: f64, theta: f64, delta: f64, t: f64) -> Matrix2<C64> {
    let s = su2_solution(g_bs, theta, delta);
    let global = C64::from_polar(1.0, -0.5 * delta * t);
    if s.omega == 0.0 {
        return Matrix2::identity() * global;
    }
    let (c, sn) = ((s.omega * t).cos(), (s.omega * t).sin());
    // M − Δ/2 = Ω (n·σ) with the σ_y component conjugated by the a†b convention.
    let nx = s.axis[0];
    let ny = -s.axis[1];
    let nz = s.axis[2];
    let m00 = C64::new(c, -sn * nz);
    let m11 = C64::new(c, sn * nz);
    let m01 = -I * sn * C64::new(nx, -ny);
    let m10 = -I * sn * C64::new(nx, ny);
    Matrix2::new(m00, m01, m10, m11) * global
}

/// Single-photon exchange envelopes (P01, P10) with decay τ and dephasing τ_φ.
pub fn decay_envelope_model(t: f64, g_bs: f64, theta: f64, tau: f64, tau_phi: f64) -> (f64, f64) {
    let env = (-t / tau).exp();
    let osc = (-t / tau_phi).exp() * (2.0 * g_bs * t + theta).cos();
    (0.5 * env * (1.0 + osc), 0.5 * env * (1.0 - osc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t_us: f64,
    pub p01: f64,
    pub p10: f64,
    pub trace: f64,
    pub purity: f64,
}

pub const TRAJECTORY_HEADER: &str = "t_us,p01,p10,trace,purity";

impl TrajectoryRow {
    /// Single-photon populations of the cavity pair (ancilla traced).
    pub fn from_state(t_us: f64, state: &QuantumState) -> Self {
        let spec = &state.spec;
        let mut p01 = 0.0;
        let mut p10 = 0.0;
        for i in 0..spec.total() {
            let l = spec.levels(i);
            let v = state.rho[(i, i)].re;
            match (l[0], l[1]) {
                (0, 1) => p01 += v,
                (1, 0) => p10 += v,
                _ => {}
            }
        }
        Self { t_us, p01, p10, trace: state.trace().re, purity: state.purity() }
    }

    pub fn csv_line(&self) -> String {
        format!("{},{},{},{},{}", self.t_us, self.p01, self.p10, self.trace, self.purity)
    }
}

/// Photon-number operator of each cavity, for expectation values.
pub fn cavity_numbers(spec: &HilbertSpec) -> Result<(CMat, CMat)> {
    let a = a_op(spec)?;
    let b = b_op(spec)?;
    Ok((a.adjoint() * &a, b.adjoint() * &b))
}

/// Rotation e^{i·angle·n} on one cavity (site 0 or 1).
pub fn phase_rotation(site: usize, angle: f64, spec: &HilbertSpec) -> Result<CMat> {
    let dim = spec.dims[site];
    let r = CMat::from_fn(dim, dim, |i, j| if i == j { C64::from_polar(1.0, angle * i as f64) } else { ZERO });
    embed(&r, site, spec)
}

/// Identity on the full space.
pub fn full_identity(spec: &HilbertSpec) -> CMat {
    identity(spec.total())
}
