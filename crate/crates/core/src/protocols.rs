//! Pulse-level experiments: beamsplitter sweeps, the continuous cSWAP with
//! its delay and frame calibration, the SWAP test and its repetition.
//!
//! Sign convention: χ is negative as measured. The pump is resonant with the
//! exchange condition when the control ancilla is excited, so the |e⟩ branch
//! sees Δ = 0 and the |g⟩ branch sees Δ = χ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dressed_system::{Decoherence, SystemModel};
use crate::dynamics::{
    phase_rotation, su2_solution, CollapseSet, Generator, HamiltonianTerms, IntegratorOptions, PulseEnvelope,
};
use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, coherent_state, displacement, embed, fock_state, kron_vec, CMat, CVec, HilbertSpec, QuantumState,
    C64, ONE, ZERO,
};
use crate::units::{mhz, ns_to_us, wrap_angle, TWO_PI};

/// Default cosine ramp on the exchange pulse, ns.
pub const DEFAULT_RAMP_NS: f64 = 24.0;
/// Control-ancilla readout duration, ns.
pub const DEFAULT_READOUT_NS: f64 = 2100.0;
/// Largest residual branch-dependent rotation accepted by the calibration, rad.
pub const CALIBRATION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Ground,
    Excited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    BeamsplitterPulse { g_bs_mhz: f64, theta: f64, delta_mhz: f64, duration_ns: f64, ramp_ns: f64 },
    Delay { duration_ns: f64 },
    AncillaRotation { axis: Axis, angle: f64 },
    FrameUpdate { mode: Mode, angle: f64 },
    /// Dispersive ancilla readout lasting `duration_ns`, then postselection on `keep`.
    Measure { duration_ns: f64, keep: Outcome },
}

impl Segment {
    pub fn duration_ns(&self) -> f64 {
        match self {
            Segment::BeamsplitterPulse { duration_ns, .. }
            | Segment::Delay { duration_ns }
            | Segment::Measure { duration_ns, .. } => *duration_ns,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub segments: Vec<Segment>,
}

impl PulseSequence {
    pub fn total_duration_ns(&self) -> f64 {
        self.segments.iter().map(Segment::duration_ns).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.segments {
            let d = s.duration_ns();
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::InvalidInput(format!("segment duration {d} ns")));
            }
            if let Segment::BeamsplitterPulse { g_bs_mhz, theta, delta_mhz, duration_ns, ramp_ns } = s {
                if ![*g_bs_mhz, *theta, *delta_mhz].iter().all(|x| x.is_finite()) {
                    return Err(Error::InvalidInput("pulse parameters must be finite".into()));
                }
                if !(*ramp_ns >= 0.0 && 2.0 * ramp_ns <= *duration_ns) {
                    return Err(Error::InvalidInput("ramps longer than the pulse".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sequence serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let seq: Self = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        seq.validate()?;
        Ok(seq)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CswapCalibration {
    pub pre_delay_ns: f64,
    pub post_delay_ns: f64,
    pub frame_a: f64,
    pub frame_b: f64,
    pub pump_phase_offset: f64,
}

/// Pulse parameters of the continuous cSWAP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CswapDesign {
    pub g_bs_mhz: f64,
    pub delta_mhz: f64,
    pub ramp_ns: f64,
    /// Pulse length including both ramps.
    pub pulse_ns: f64,
}

/// g = |χ|/(2√3) so the |g⟩ branch performs exactly two detuned swaps; the
/// flat top is shortened by one ramp length to keep the pulse area π/2.
pub fn cswap_design(model: &SystemModel, ramp_ns: f64) -> Result<CswapDesign> {
    let chi = model.chi_b;
    if chi == 0.0 || !chi.is_finite() {
        return Err(Error::InvalidInput("cSWAP needs a non-zero dispersive shift".into()));
    }
    let g = chi.abs() / (2.0 * 3f64.sqrt());
    let bare_ns = 1e3 * PI / (2.0 * mhz(g));
    if !(ramp_ns >= 0.0 && ramp_ns <= bare_ns) {
        return Err(Error::InvalidInput("ramp longer than the gate".into()));
    }
    Ok(CswapDesign { g_bs_mhz: g, delta_mhz: chi, ramp_ns, pulse_ns: bare_ns + ramp_ns })
}

fn cswap_pulses(design: &CswapDesign, cal: &CswapCalibration, n_rounds: usize) -> Vec<Segment> {
    (0..n_rounds)
        .map(|_| Segment::BeamsplitterPulse {
            g_bs_mhz: design.g_bs_mhz,
            theta: cal.pump_phase_offset,
            delta_mhz: design.delta_mhz,
            duration_ns: design.pulse_ns,
            ramp_ns: design.ramp_ns,
        })
        .collect()
}

/// N back-to-back cSWAP pulses framed by the calibrated delays and frame updates.
pub fn build_cswap(model: &SystemModel, cal: &CswapCalibration, n_rounds: usize, ramp_ns: f64) -> Result<PulseSequence> {
    let design = cswap_design(model, ramp_ns)?;
    let mut segments = vec![Segment::Delay { duration_ns: cal.pre_delay_ns }];
    segments.extend(cswap_pulses(&design, cal, n_rounds));
    segments.push(Segment::Delay { duration_ns: cal.post_delay_ns });
    segments.push(Segment::FrameUpdate { mode: Mode::A, angle: cal.frame_a });
    segments.push(Segment::FrameUpdate { mode: Mode::B, angle: cal.frame_b });
    let seq = PulseSequence { segments };
    seq.validate()?;
    Ok(seq)
}

/// Duration of the continuous cSWAP pulse (μs) for χ in MHz: π/(2g) + ramp with g = |χ|/(2√3).
pub fn continuous_duration(chi_mhz: f64, ramp_ns: f64) -> f64 {
    let g = mhz(chi_mhz.abs() / (2.0 * 3f64.sqrt()));
    PI / (2.0 * g) + ns_to_us(ramp_ns)
}

/// Duration (μs) of the Trotterized cSWAP: π/(2g) + π/|χ|, rates in MHz.
pub fn trotterized_duration(g_bs_mhz: f64, chi_mhz: f64) -> f64 {
    PI / (2.0 * mhz(g_bs_mhz)) + PI / mhz(chi_mhz.abs())
}

/// Rabi rate (MHz) giving n full ancilla cycles during an unconditional swap of length t (μs).
pub fn unconditional_swap_rabi(t_swap_us: f64, n: u32) -> Result<f64> {
    if n == 0 || !(t_swap_us > 0.0) {
        return Err(Error::InvalidInput("need n ≥ 1 and a positive swap time".into()));
    }
    Ok(n as f64 / t_swap_us)
}

/// Drive terms for the dynamically decoupled unconditional swap: Ω_R t = 2nπ and
/// ancilla drive detuned by χ/2.
pub fn unconditional_swap_terms(model: &SystemModel, g_bs_mhz: f64, n: u32) -> Result<HamiltonianTerms> {
    let t_swap = PI / (2.0 * mhz(g_bs_mhz));
    let rabi = unconditional_swap_rabi(t_swap, n)?;
    Ok(HamiltonianTerms {
        g_bs: g_bs_mhz,
        delta: 0.5 * model.chi_b,
        rabi,
        rabi_detuning: 0.5 * model.chi_b,
        ..HamiltonianTerms::from_model(model)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecOptions {
    pub include_kerr: bool,
    /// Collapse rates during delays and exchange pulses.
    pub gate_collapse: CollapseSet,
    /// Collapse rates during ancilla readout.
    pub readout_collapse: CollapseSet,
    pub integrator: IntegratorOptions,
}

impl ExecOptions {
    pub fn closed(include_kerr: bool) -> Self {
        Self {
            include_kerr,
            gate_collapse: CollapseSet::none(),
            readout_collapse: CollapseSet::none(),
            integrator: IntegratorOptions::default(),
        }
    }

    pub fn with_decoherence(d: &Decoherence, include_kerr: bool) -> Self {
        let c = CollapseSet::from_decoherence(d);
        Self { include_kerr, gate_collapse: c, readout_collapse: c, integrator: IntegratorOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub state: QuantumState,
    /// Probability of the kept outcome of each measurement, in order.
    pub outcomes: Vec<f64>,
    pub duration_ns: f64,
}

fn idle_terms(model: &SystemModel, include_kerr: bool) -> HamiltonianTerms {
    let m = if include_kerr { *model } else { model.without_kerr() };
    HamiltonianTerms::from_model(&m)
}

fn ancilla_rotation(axis: Axis, angle: f64, spec: &HilbertSpec) -> Result<CMat> {
    let (c, s) = ((0.5 * angle).cos(), (0.5 * angle).sin());
    let r = match axis {
        Axis::X => CMat::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0)]),
        Axis::Y => CMat::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)]),
    };
    embed(&r, 2, spec)
}

fn projector(keep: Outcome, spec: &HilbertSpec) -> Result<CMat> {
    let mut p = CMat::zeros(2, 2);
    match keep {
        Outcome::Ground => p[(0, 0)] = ONE,
        Outcome::Excited => p[(1, 1)] = ONE,
    }
    embed(&p, 2, spec)
}

fn apply_unitary(rho: &CMat, u: &CMat) -> CMat {
    u * rho * u.adjoint()
}

/// Runs a sequence on a density matrix over (cavity A, cavity B, ancilla).
pub fn execute(seq: &PulseSequence, model: &SystemModel, state: &QuantumState, opts: &ExecOptions) -> Result<Execution> {
    seq.validate()?;
    model.validate()?;
    let spec = state.spec.clone();
    if spec.dims.len() != 3 {
        return Err(Error::DimensionMismatch("sequences act on (cavity A, cavity B, ancilla)".into()));
    }
    let terms = idle_terms(model, opts.include_kerr);
    let mut rho = state.rho.clone();
    let mut t = 0.0;
    let mut outcomes = Vec::new();
    for seg in &seq.segments {
        match *seg {
            Segment::BeamsplitterPulse { g_bs_mhz, theta, delta_mhz, duration_ns, ramp_ns } => {
                let dur = ns_to_us(duration_ns);
                let pulse = PulseEnvelope {
                    amplitude: mhz(g_bs_mhz),
                    theta,
                    detuning: mhz(delta_mhz),
                    t_start: t,
                    duration: dur,
                    ramp: ns_to_us(ramp_ns),
                };
                let mut g = Generator::lab_frame(&terms, &spec, Some(pulse))?;
                g.set_collapse(&opts.gate_collapse)?;
                rho = g.propagate_rho(&rho, t, t + dur, &opts.integrator)?;
                t += dur;
            }
            Segment::Delay { duration_ns } => {
                let dur = ns_to_us(duration_ns);
                rho = idle(&terms, &spec, &rho, dur, &opts.gate_collapse, &opts.integrator)?;
                t += dur;
            }
            Segment::AncillaRotation { axis, angle } => {
                rho = apply_unitary(&rho, &ancilla_rotation(axis, angle, &spec)?);
            }
            Segment::FrameUpdate { mode, angle } => {
                let site = if mode == Mode::A { 0 } else { 1 };
                rho = apply_unitary(&rho, &phase_rotation(site, angle, &spec)?);
            }
            Segment::Measure { duration_ns, keep } => {
                let dur = ns_to_us(duration_ns);
                rho = idle(&terms, &spec, &rho, dur, &opts.readout_collapse, &opts.integrator)?;
                t += dur;
                let p = projector(keep, &spec)?;
                let kept = &p * &rho * &p;
                let prob = kept.trace().re;
                if !(prob > 1e-14) {
                    return Err(Error::InvalidInput("postselected outcome has zero probability".into()));
                }
                rho = kept / C64::new(prob, 0.0);
                outcomes.push(prob);
            }
        }
    }
    Ok(Execution { state: QuantumState::from_rho(rho, &spec)?, outcomes, duration_ns: t * 1e3 })
}

fn idle(
    terms: &HamiltonianTerms,
    spec: &HilbertSpec,
    rho: &CMat,
    dur: f64,
    collapse: &CollapseSet,
    integrator: &IntegratorOptions,
) -> Result<CMat> {
    if dur == 0.0 {
        return Ok(rho.clone());
    }
    if collapse.is_empty() {
        let e = terms.idle_energies(spec)?;
        let d = spec.total();
        return Ok(CMat::from_fn(d, d, |r, c| rho[(r, c)] * C64::from_polar(1.0, -(e[r] - e[c]) * dur)));
    }
    let mut g = Generator::lab_frame(terms, spec, None)?;
    g.set_collapse(collapse)?;
    g.propagate_rho(rho, 0.0, dur, integrator)
}

/// Closed-system execution on a state vector; measurements are not allowed.
pub fn execute_pure(
    seq: &PulseSequence,
    model: &SystemModel,
    psi: &CVec,
    spec: &HilbertSpec,
    include_kerr: bool,
    integrator: &IntegratorOptions,
) -> Result<CVec> {
    seq.validate()?;
    let terms = idle_terms(model, include_kerr);
    let energies = terms.idle_energies(spec)?;
    let mut psi = psi.clone();
    let mut t = 0.0;
    for seg in &seq.segments {
        match *seg {
            Segment::BeamsplitterPulse { g_bs_mhz, theta, delta_mhz, duration_ns, ramp_ns } => {
                let dur = ns_to_us(duration_ns);
                let pulse = PulseEnvelope {
                    amplitude: mhz(g_bs_mhz),
                    theta,
                    detuning: mhz(delta_mhz),
                    t_start: t,
                    duration: dur,
                    ramp: ns_to_us(ramp_ns),
                };
                let g = Generator::lab_frame(&terms, spec, Some(pulse))?;
                psi = g.propagate_psi(&psi, t, t + dur, integrator)?;
                t += dur;
            }
            Segment::Delay { duration_ns } => {
                let dur = ns_to_us(duration_ns);
                for (v, e) in psi.iter_mut().zip(&energies) {
                    *v *= C64::from_polar(1.0, -e * dur);
                }
                t += dur;
            }
            Segment::AncillaRotation { axis, angle } => psi = ancilla_rotation(axis, angle, spec)? * psi,
            Segment::FrameUpdate { mode, angle } => {
                let site = if mode == Mode::A { 0 } else { 1 };
                psi = phase_rotation(site, angle, spec)? * psi;
            }
            Segment::Measure { .. } => {
                return Err(Error::InvalidInput("measurements need the density-matrix path".into()));
            }
        }
    }
    Ok(psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Displacement of the calibration states D(α)|1⟩ ⊗ D(−α)|0⟩.
    pub alpha: f64,
    pub dims: (usize, usize),
    pub ramp_ns: f64,
    pub include_kerr: bool,
    pub integrator: IntegratorOptions,
    pub max_iterations: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            dims: (12, 12),
            ramp_ns: DEFAULT_RAMP_NS,
            include_kerr: false,
            integrator: IntegratorOptions::adaptive(1e-10),
            max_iterations: 12,
        }
    }
}

/// Phase-space angles of the two cavity centroids for each control state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchAngles {
    pub a_g: f64,
    pub b_g: f64,
    pub a_e: f64,
    pub b_e: f64,
}

impl BranchAngles {
    /// Control-dependent rotation of each output mode.
    pub fn residual(&self) -> (f64, f64) {
        (wrap_angle(self.a_e - self.a_g), wrap_angle(self.b_e - self.b_g))
    }
}

fn centroid(psi: &CVec, op: &CMat) -> C64 {
    (psi.adjoint() * op * psi)[(0, 0)]
}

/// Simulates the calibration experiment for given delays and returns the centroid angles.
pub fn branch_angles(
    model: &SystemModel,
    n_rounds: usize,
    pre_ns: f64,
    post_ns: f64,
    opts: &CalibrationOptions,
) -> Result<BranchAngles> {
    let (da, db) = opts.dims;
    let spec = HilbertSpec::cavities_ancilla(da, db)?;
    let alpha = C64::new(opts.alpha, 0.0);
    let fa = displacement(alpha, da) * fock_state(1, da);
    let fb = coherent_state(-alpha, db)?;
    let a = embed(&annihilation(da), 0, &spec)?;
    let b = embed(&annihilation(db), 1, &spec)?;
    let cal = CswapCalibration { pre_delay_ns: pre_ns, post_delay_ns: post_ns, ..Default::default() };
    let seq = build_cswap(model, &cal, n_rounds, opts.ramp_ns)?;
    let mut out = [0.0; 4];
    for (k, q) in [0usize, 1].iter().enumerate() {
        let psi0 = kron_vec(&kron_vec(&fa, &fb), &fock_state(*q, 2));
        let psi = execute_pure(&seq, model, &psi0, &spec, opts.include_kerr, &opts.integrator)?;
        let (ca, cb) = (centroid(&psi, &a), centroid(&psi, &b));
        // With an odd number of swaps in the |e⟩ branch the centroids trade places.
        let swapped = *q == 1 && n_rounds % 2 == 1;
        let (ra, rb) = if swapped { (-alpha, alpha) } else { (alpha, -alpha) };
        out[2 * k] = (ca / ra).arg();
        out[2 * k + 1] = (cb / rb).arg();
    }
    Ok(BranchAngles { a_g: out[0], b_g: out[1], a_e: out[2], b_e: out[3] })
}

/// Solves for the pre/post delays that remove the control-dependent rotation,
/// then sets frame updates that cancel the remaining common rotation.
pub fn calibrate_delays(model: &SystemModel, n_rounds: usize, opts: &CalibrationOptions) -> Result<CswapCalibration> {
    if n_rounds == 0 {
        return Ok(CswapCalibration::default());
    }
    let period_ns = 1e3 * TWO_PI / mhz(model.chi_b.abs());
    let wrap_t = |t: f64| t.rem_euclid(period_ns);
    let mut t = [0.0, 0.0];
    let mut angles = branch_angles(model, n_rounds, t[0], t[1], opts)?;
    let step = 0.02 * period_ns;
    for _ in 0..opts.max_iterations {
        let r = angles.residual();
        if r.0.abs().max(r.1.abs()) < 1e-6 {
            break;
        }
        let da = branch_angles(model, n_rounds, t[0] + step, t[1], opts)?.residual();
        let db = branch_angles(model, n_rounds, t[0], t[1] + step, opts)?.residual();
        let j = nalgebra::Matrix2::new(
            wrap_angle(da.0 - r.0) / step,
            wrap_angle(db.0 - r.0) / step,
            wrap_angle(da.1 - r.1) / step,
            wrap_angle(db.1 - r.1) / step,
        );
        let inv = j
            .try_inverse()
            .ok_or_else(|| Error::CalibrationAmbiguity(r.0.abs().max(r.1.abs())))?;
        let dt = inv * nalgebra::Vector2::new(r.0, r.1);
        t = [wrap_t(t[0] - dt[0]), wrap_t(t[1] - dt[1])];
        angles = branch_angles(model, n_rounds, t[0], t[1], opts)?;
    }
    let r = angles.residual();
    let worst = r.0.abs().max(r.1.abs());
    if worst > CALIBRATION_TOLERANCE {
        return Err(Error::CalibrationAmbiguity(worst));
    }
    let common_a = angles.a_g + 0.5 * r.0;
    let common_b = angles.b_g + 0.5 * r.1;
    Ok(CswapCalibration {
        pre_delay_ns: t[0],
        post_delay_ns: t[1],
        frame_a: wrap_angle(-common_a),
        frame_b: wrap_angle(-common_b),
        pump_phase_offset: 0.0,
    })
}

/// Entanglement fidelity of the calibrated sequence against
/// |g⟩⟨g| ⊗ 1 + |e⟩⟨e| ⊗ SWAP on the {0,1}⊗{0,1}⊗{g,e} subspace.
pub fn truth_table_fidelity(
    model: &SystemModel,
    cal: &CswapCalibration,
    n_rounds: usize,
    opts: &CalibrationOptions,
) -> Result<f64> {
    let spec = HilbertSpec::cavities_ancilla(4, 4)?;
    let seq = build_cswap(model, cal, n_rounds, opts.ramp_ns)?;
    let basis: Vec<(usize, usize, usize)> =
        (0..2).flat_map(|na| (0..2).flat_map(move |nb| (0..2).map(move |q| (na, nb, q)))).collect();
    let mut overlap = ZERO;
    for &(na, nb, q) in &basis {
        let psi0 = kron_vec(&kron_vec(&fock_state(na, 4), &fock_state(nb, 4)), &fock_state(q, 2));
        let out = execute_pure(&seq, model, &psi0, &spec, opts.include_kerr, &opts.integrator)?;
        let (ta, tb) = if q == 1 && n_rounds % 2 == 1 { (nb, na) } else { (na, nb) };
        overlap += out[spec.index(&[ta, tb, q])];
    }
    Ok(overlap.norm_sqr() / (basis.len() * basis.len()) as f64)
}

/// Phases acquired by a photon starting in cavity A in the |g⟩ branch of a
/// rectangular cSWAP pulse: (total, dynamical, geometric).
pub fn g_branch_phases(model: &SystemModel) -> Result<(f64, f64, f64)> {
    let design = cswap_design(model, 0.0)?;
    let spec = HilbertSpec::new(&[2, 2], &["a", "b"])?;
    let terms = HamiltonianTerms { g_bs: design.g_bs_mhz, delta: design.delta_mhz, ..Default::default() };
    let h = crate::dynamics::build_hamiltonian(&terms, &spec)?;
    let t = ns_to_us(design.pulse_ns);
    let u = crate::dynamics::unitary(&h, t);
    let i10 = spec.index(&[1, 0]);
    let total = u[(i10, i10)].arg();
    // ⟨H⟩ is conserved and equals Δ for a photon starting in A.
    let dynamical = -h[(i10, i10)].re * t;
    Ok((total, wrap_angle(dynamical), wrap_angle(total - dynamical)))
}

/// Berry phase −(loops)·π(1 − n_z) of the operator trajectory on the sphere,
/// i.e. minus half the enclosed solid angle.
pub fn half_solid_angle_phase(model: &SystemModel) -> Result<f64> {
    let design = cswap_design(model, 0.0)?;
    let s = su2_solution(mhz(design.g_bs_mhz), 0.0, mhz(design.delta_mhz));
    let t = ns_to_us(design.pulse_ns);
    let loops = s.omega * t / PI;
    Ok(wrap_angle(-loops * PI * (1.0 - s.axis[2])))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapTestConfig {
    pub alpha: f64,
    pub dims: (usize, usize),
    pub ramp_ns: f64,
    pub readout_ns: f64,
    pub include_kerr: bool,
    /// None runs the closed system.
    pub decoherence: Option<Decoherence>,
    pub integrator: IntegratorOptions,
}

impl Default for SwapTestConfig {
    fn default() -> Self {
        Self {
            alpha: 2f64.sqrt(),
            dims: (15, 15),
            ramp_ns: DEFAULT_RAMP_NS,
            readout_ns: DEFAULT_READOUT_NS,
            include_kerr: true,
            decoherence: None,
            integrator: IntegratorOptions::adaptive(1e-8),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SwapTestResult {
    /// Cavity state conditioned on the kept control outcome.
    pub state: QuantumState,
    pub p_g: f64,
    pub calibration: CswapCalibration,
    /// Delays plus pulses, ns.
    pub cswap_ns: f64,
}

/// Full SWAP-test sequence for a given calibration.
pub fn swap_test_sequence(
    model: &SystemModel,
    cal: &CswapCalibration,
    n_cswaps: usize,
    ramp_ns: f64,
    readout_ns: f64,
) -> Result<PulseSequence> {
    let mut segments = vec![Segment::AncillaRotation { axis: Axis::Y, angle: PI / 2.0 }];
    segments.extend(build_cswap(model, cal, n_cswaps, ramp_ns)?.segments);
    segments.push(Segment::AncillaRotation { axis: Axis::Y, angle: -PI / 2.0 });
    segments.push(Segment::Measure { duration_ns: readout_ns, keep: Outcome::Ground });
    Ok(PulseSequence { segments })
}

/// π/2 – N·cSWAP – −π/2 – control readout, postselected on |g⟩.
pub fn swap_test_with(
    model: &SystemModel,
    initial_a: &CVec,
    initial_b: &CVec,
    n_cswaps: usize,
    cal: &CswapCalibration,
    cfg: &SwapTestConfig,
    exec: &ExecOptions,
) -> Result<SwapTestResult> {
    if n_cswaps.is_multiple_of(2) {
        return Err(Error::InvalidInput("the SWAP test needs an odd number of cSWAPs".into()));
    }
    let (da, db) = cfg.dims;
    if initial_a.len() != da || initial_b.len() != db {
        return Err(Error::DimensionMismatch("initial states do not match the configured dims".into()));
    }
    let spec = HilbertSpec::cavities_ancilla(da, db)?;
    let psi0 = kron_vec(&kron_vec(initial_a, initial_b), &fock_state(0, 2));
    let state = QuantumState::from_pure(&psi0, &spec)?;
    let seq = swap_test_sequence(model, cal, n_cswaps, cfg.ramp_ns, cfg.readout_ns)?;
    let run = execute(&seq, model, &state, exec)?;
    let cav = run.state.partial_trace(&[0, 1])?;
    let cswap_ns = cal.pre_delay_ns + cal.post_delay_ns + n_cswaps as f64 * cswap_design(model, cfg.ramp_ns)?.pulse_ns;
    Ok(SwapTestResult { state: cav, p_g: run.outcomes[0], calibration: *cal, cswap_ns })
}

/// Calibrates for `n_cswaps` and runs the SWAP test.
pub fn swap_test(
    model: &SystemModel,
    initial_a: &CVec,
    initial_b: &CVec,
    n_cswaps: usize,
    cfg: &SwapTestConfig,
) -> Result<SwapTestResult> {
    let copts = CalibrationOptions { ramp_ns: cfg.ramp_ns, include_kerr: cfg.include_kerr, ..Default::default() };
    let cal = calibrate_delays(model, n_cswaps, &copts)?;
    let mut exec = match &cfg.decoherence {
        Some(d) => ExecOptions::with_decoherence(d, cfg.include_kerr),
        None => ExecOptions::closed(cfg.include_kerr),
    };
    exec.integrator = cfg.integrator;
    swap_test_with(model, initial_a, initial_b, n_cswaps, &cal, cfg, &exec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub g_bs_mhz: f64,
    pub delta_mhz: f64,
    pub t_us: f64,
    pub p01: f64,
    pub p10: f64,
}

/// Prepares |0,1⟩⊗|g⟩, applies a continuous exchange pump and records the
/// single-photon populations. Each (g, Δ) pair is an independent run.
pub fn beamsplitter_sweep(
    model: &SystemModel,
    g_grid_mhz: &[f64],
    delta_grid_mhz: &[f64],
    times_us: &[f64],
    dims: (usize, usize),
    integrator: &IntegratorOptions,
) -> Result<Vec<SweepRow>> {
    if g_grid_mhz.is_empty() || delta_grid_mhz.is_empty() || times_us.is_empty() {
        return Err(Error::InvalidInput("empty sweep grid".into()));
    }
    if times_us.windows(2).any(|w| w[1] < w[0]) || times_us[0] < 0.0 {
        return Err(Error::InvalidInput("times must be ascending and ≥ 0".into()));
    }
    let spec = HilbertSpec::cavities_ancilla(dims.0, dims.1)?;
    let psi = kron_vec(&kron_vec(&fock_state(0, dims.0), &fock_state(1, dims.1)), &fock_state(0, 2));
    let rho0 = &psi * psi.adjoint();
    let terms = HamiltonianTerms::from_model(model);
    let collapse = CollapseSet::from_decoherence(&model.decoherence);
    let i01 = spec.index(&[0, 1, 0]);
    let i10 = spec.index(&[1, 0, 0]);
    let runs: Vec<(f64, f64)> =
        g_grid_mhz.iter().flat_map(|&g| delta_grid_mhz.iter().map(move |&d| (g, d))).collect();
    let results: Vec<Result<Vec<SweepRow>>> = {
        use rayon::prelude::*;
        runs.par_iter()
            .map(|&(g, d)| {
                let pulse = PulseEnvelope::continuous(mhz(g), 0.0, mhz(d), 0.0);
                let mut gen = Generator::lab_frame(&terms, &spec, Some(pulse))?;
                gen.set_collapse(&collapse)?;
                let mut rows = Vec::with_capacity(times_us.len());
                gen.propagate_rho_sampled(&rho0, 0.0, times_us, integrator, |t, rho| {
                    rows.push(SweepRow { g_bs_mhz: g, delta_mhz: d, t_us: t, p01: rho[(i01, i01)].re, p10: rho[(i10, i10)].re });
                })?;
                Ok(rows)
            })
            .collect()
    };
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Coherent product state |α⟩|β⟩ for the given dims.
pub fn coherent_pair(alpha: C64, beta: C64, dims: (usize, usize)) -> Result<(CVec, CVec)> {
    Ok((coherent_state(alpha, dims.0)?, coherent_state(beta, dims.1)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_rate_for_device() {
        let d = cswap_design(&SystemModel::device(), DEFAULT_RAMP_NS).unwrap();
        assert!((d.g_bs_mhz - 0.319).abs() < 5e-4);
        assert!((d.pulse_ns - d.ramp_ns - 784.0).abs() < 1.0);
    }

    #[test]
    fn sequence_json_round_trip() {
        let seq = build_cswap(&SystemModel::device(), &CswapCalibration::default(), 3, 24.0).unwrap();
        let back = PulseSequence::from_json(&seq.to_json()).unwrap();
        assert_eq!(seq, back);
    }
}
