//! Wigner sampling and two-qubit Pauli tomography in the coherent-state
//! basis |0⟩ ≈ |α⟩, |1⟩ ≈ |−α⟩, built from displaced-parity measurements.

use serde::{Deserialize, Serialize};

use crate::dressed_system::Decoherence;
use crate::error::{Error, Result};
use crate::hilbert::{displaced_diagonal, displaced_parity, expm, CMat, QuantumState, C64, ONE, ZERO};

/// Extra Fock levels used when displacing a diagonal observable.
const PAD_LEVELS: usize = 60;
/// Largest population tolerated in the top Fock level of a tomographed mode.
const EDGE_POPULATION: f64 = 1e-4;

/// Parity-map duration for cavity A, ns.
pub const TAU_PARITY_A_NS: f64 = 616.0;
/// Parity-map duration for cavity B, ns.
pub const TAU_PARITY_B_NS: f64 = 432.0;
/// Tomography-ancilla readout duration, ns.
pub const TAU_PARITY_RO_NS: f64 = 2100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> char {
        ['I', 'X', 'Y', 'Z'][self.index()]
    }
}

/// The four displacements {α, −α, 0, iπ/(8α)} and the combinations turning
/// their displaced-parity values into I, X, Y, Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliDisplacementSet {
    pub alpha: C64,
    pub betas: [C64; 4],
    /// Row k gives the weights of the four displacements for Pauli k (I, X, Y, Z).
    pub coefficients: [[f64; 4]; 4],
    pub y_scale: f64,
}

impl PauliDisplacementSet {
    pub fn new(alpha: C64) -> Result<Self> {
        let a = alpha.norm();
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidInput("basis amplitude must be non-zero".into()));
        }
        let u = alpha / a;
        let beta_y = C64::new(0.0, std::f64::consts::PI / (8.0 * a)) * u;
        Ok(Self {
            alpha,
            betas: [alpha, -alpha, ZERO, beta_y],
            coefficients: [
                [1.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                // The smallest off-diagonal displacement reads −Y.
                [0.0, 0.0, 0.0, -1.0],
                [1.0, -1.0, 0.0, 0.0],
            ],
            y_scale: (-std::f64::consts::PI.powi(2) / (32.0 * a * a)).exp(),
        })
    }
}

/// ⟨σᵢσⱼ⟩ indexed (I, X, Y, Z) × (I, X, Y, Z); entries are raw, without Y rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliTable {
    pub entries: [[f64; 4]; 4],
    pub y_scale: f64,
}

impl PauliTable {
    pub fn get(&self, a: Pauli, b: Pauli) -> f64 {
        self.entries[a.index()][b.index()]
    }

    /// Each Y factor divided by the single-mode Y scale.
    pub fn rescaled(&self) -> PauliTable {
        let mut e = self.entries;
        for (i, row) in e.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let ny = (i == 2) as i32 + (j == 2) as i32;
                *v /= self.y_scale.powi(ny);
            }
        }
        PauliTable { entries: e, y_scale: 1.0 }
    }

    pub fn to_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for a in Pauli::ALL {
            for b in Pauli::ALL {
                map.insert(format!("{}{}", a.label(), b.label()), serde_json::json!(self.get(a, b)));
            }
        }
        map.insert("y_scale".into(), serde_json::json!(self.y_scale));
        serde_json::to_string_pretty(&map).expect("table serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum YyConvention {
    /// Measured YY as is.
    Raw,
    /// YY divided by y_scale².
    Rescaled,
}

/// F = ¼(II + XX + YY − ZZ).
pub fn bell_fidelity(pt: &PauliTable, convention: YyConvention) -> f64 {
    let t = match convention {
        YyConvention::Raw => *pt,
        YyConvention::Rescaled => pt.rescaled(),
    };
    0.25 * (t.get(Pauli::I, Pauli::I) + t.get(Pauli::X, Pauli::X) + t.get(Pauli::Y, Pauli::Y) - t.get(Pauli::Z, Pauli::Z))
}

/// Imperfections of one cavity's parity measurement. Rates in 1/μs, times in μs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityMeasurement {
    pub tau_p: f64,
    pub tau_ro: f64,
    /// Cavity decay during the parity map.
    pub kappa: f64,
    /// Ancilla decay and dephasing during the map.
    pub gamma_q: f64,
    pub gamma_phi_q: f64,
    /// Ancilla decay during its readout.
    pub gamma_q_ro: f64,
}

impl ParityMeasurement {
    pub fn ideal() -> Self {
        Self { tau_p: 0.0, tau_ro: 0.0, kappa: 0.0, gamma_q: 0.0, gamma_phi_q: 0.0, gamma_q_ro: 0.0 }
    }

    /// Multiplier from ancilla decay and dephasing during the map and a readout flip.
    pub fn ancilla_factor(&self) -> f64 {
        let flip = 0.5 * (1.0 - (-self.tau_ro * self.gamma_q_ro).exp());
        (-0.5 * self.gamma_q * self.tau_p).exp() * (-self.gamma_phi_q * self.tau_p).exp() * (1.0 - 2.0 * flip)
    }

    /// Diagonal of the measured observable in the Fock basis, padded to `len`.
    ///
    /// The ancilla coherence picks up e^{iπn t/τp} while photon loss moves
    /// weight from n to n − 1 (adjoint evolution), so y_n' = iπn/τp·y_n + κn(y_{n−1} − y_n).
    pub fn observable_diagonal(&self, len: usize) -> Vec<C64> {
        let parity: Vec<C64> = (0..len).map(|n| if n % 2 == 0 { ONE } else { -ONE }).collect();
        let c = C64::new(self.ancilla_factor(), 0.0);
        if self.kappa == 0.0 || self.tau_p == 0.0 {
            return parity.into_iter().map(|p| p * c).collect();
        }
        let rate = std::f64::consts::PI / self.tau_p;
        let mut m = CMat::zeros(len, len);
        for n in 0..len {
            let nf = n as f64;
            m[(n, n)] = C64::new(-self.kappa * nf, rate * nf) * self.tau_p;
            if n > 0 {
                m[(n, n - 1)] = C64::new(self.kappa * nf * self.tau_p, 0.0);
            }
        }
        let prop = expm(&m);
        (0..len).map(|n| C64::new(prop.row(n).sum().re, 0.0) * c).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyNoise {
    pub a: ParityMeasurement,
    pub b: ParityMeasurement,
}

impl TomographyNoise {
    pub fn ideal() -> Self {
        Self { a: ParityMeasurement::ideal(), b: ParityMeasurement::ideal() }
    }

    pub fn from_decoherence(d: &Decoherence) -> Self {
        Self::with_readout(d, TAU_PARITY_RO_NS * 1e-3)
    }

    pub fn with_readout(d: &Decoherence, tro: f64) -> Self {
        let inv = |t: f64| if t.is_finite() { 1.0 / t } else { 0.0 };
        Self {
            a: ParityMeasurement {
                tau_p: TAU_PARITY_A_NS * 1e-3,
                tau_ro: tro,
                kappa: inv(d.t1_a),
                gamma_q: inv(d.t1_qa),
                gamma_phi_q: inv(d.tphi_qa),
                gamma_q_ro: inv(d.t1_qa),
            },
            b: ParityMeasurement {
                tau_p: TAU_PARITY_B_NS * 1e-3,
                tau_ro: tro,
                kappa: inv(d.t1_b),
                gamma_q: inv(d.t1_qb),
                gamma_phi_q: inv(d.tphi_qb),
                gamma_q_ro: inv(d.t1_qb),
            },
        }
    }
}

fn check_real(z: C64) -> Result<f64> {
    if z.im.abs() > 1e-9 * z.re.abs().max(1.0) {
        return Err(Error::InvalidInput(format!("non-Hermitian state: parity expectation has imaginary part {:.2e}", z.im)));
    }
    Ok(z.re)
}

fn check_support(rho: &CMat, label: &str) -> Result<()> {
    let d = rho.nrows();
    let edge = rho[(d - 1, d - 1)].re;
    if edge > EDGE_POPULATION {
        return Err(Error::TruncationError(format!("mode {label} has population {edge:.2e} in its top level")));
    }
    Ok(())
}

/// ⟨D(β) P D(β)†⟩ of one mode; ranges over [−1, 1].
pub fn wigner(state: &QuantumState, mode: usize, beta: C64) -> Result<f64> {
    let r = state.partial_trace(&[mode])?;
    let d = r.rho.nrows();
    check_real((&r.rho * displaced_parity(beta, d)).trace())
}

/// ⟨D(β_A, β_B) P_A P_B D†(β_A, β_B)⟩ on the first two sites.
pub fn joint_wigner(state: &QuantumState, beta_a: C64, beta_b: C64) -> Result<f64> {
    let r = cavity_marginal(state)?;
    let (da, db) = (r.spec.dims[0], r.spec.dims[1]);
    let op = displaced_parity(beta_a, da).kronecker(&displaced_parity(beta_b, db));
    check_real(trace_product(&r.rho, &op))
}

fn cavity_marginal(state: &QuantumState) -> Result<QuantumState> {
    match state.spec.dims.len() {
        2 => Ok(state.clone()),
        n if n > 2 => state.partial_trace(&[0, 1]),
        _ => Err(Error::DimensionMismatch("joint quantities need two cavities".into())),
    }
}

/// Tr(ρ O) without forming the product.
fn trace_product(rho: &CMat, op: &CMat) -> C64 {
    let mut s = ZERO;
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            s += rho[(i, j)] * op[(j, i)];
        }
    }
    s
}

/// Joint displaced parity at (β_A, β_B) as seen through the noisy parity measurements.
pub fn noisy_joint_parity(state: &QuantumState, beta_a: C64, beta_b: C64, noise: &TomographyNoise) -> Result<f64> {
    let r = cavity_marginal(state)?;
    let (da, db) = (r.spec.dims[0], r.spec.dims[1]);
    let ya = noise.a.observable_diagonal(da + PAD_LEVELS);
    let yb = noise.b.observable_diagonal(db + PAD_LEVELS);
    let op = displaced_diagonal(beta_a, &ya, da).kronecker(&displaced_diagonal(beta_b, &yb, db));
    check_real(trace_product(&r.rho, &op))
}

/// Sixteen two-qubit Pauli expectations from the 4×4 displaced-parity grid.
pub fn pauli_expectations(state: &QuantumState, pds: &PauliDisplacementSet, noise: &TomographyNoise) -> Result<PauliTable> {
    let r = cavity_marginal(state)?;
    let (da, db) = (r.spec.dims[0], r.spec.dims[1]);
    check_support(&r.partial_trace(&[0])?.rho, "A")?;
    check_support(&r.partial_trace(&[1])?.rho, "B")?;
    let ya = noise.a.observable_diagonal(da + PAD_LEVELS);
    let yb = noise.b.observable_diagonal(db + PAD_LEVELS);
    let oa: Vec<CMat> = pds.betas.iter().map(|&b| displaced_diagonal(b, &ya, da)).collect();
    let ob: Vec<CMat> = pds.betas.iter().map(|&b| displaced_diagonal(b, &yb, db)).collect();
    let mut w = [[0.0; 4]; 4];
    for (k, a) in oa.iter().enumerate() {
        for (l, b) in ob.iter().enumerate() {
            w[k][l] = check_real(trace_product(&r.rho, &a.kronecker(b)))?;
        }
    }
    let mut entries = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    s += pds.coefficients[i][k] * pds.coefficients[j][l] * w[k][l];
                }
            }
            entries[i][j] = s;
        }
    }
    Ok(PauliTable { entries, y_scale: pds.y_scale })
}

/// Local Wigner grid as CSV rows `re,im,w`.
pub fn wigner_grid_csv(state: &QuantumState, mode: usize, re: &[f64], im: &[f64]) -> Result<String> {
    use rayon::prelude::*;
    if re.is_empty() || im.is_empty() {
        return Err(Error::InvalidInput("empty Wigner grid".into()));
    }
    let r = state.partial_trace(&[mode])?;
    let pts: Vec<(f64, f64)> = im.iter().flat_map(|&y| re.iter().map(move |&x| (x, y))).collect();
    let vals: Vec<Result<f64>> = pts.par_iter().map(|&(x, y)| wigner(&r, 0, C64::new(x, y))).collect();
    let mut out = String::from("re,im,w\n");
    for ((x, y), v) in pts.iter().zip(vals) {
        out.push_str(&format!("{x:.6},{y:.6},{:.9}\n", v?));
    }
    Ok(out)
}

/// Joint Wigner values at the given (β_A, β_B) pairs as CSV rows `re_a,im_a,re_b,im_b,w`.
pub fn joint_wigner_csv(state: &QuantumState, points: &[(C64, C64)]) -> Result<String> {
    use rayon::prelude::*;
    if points.is_empty() {
        return Err(Error::InvalidInput("empty Wigner grid".into()));
    }
    let r = cavity_marginal(state)?;
    let vals: Vec<Result<f64>> = points.par_iter().map(|&(a, b)| joint_wigner(&r, a, b)).collect();
    let mut out = String::from("re_a,im_a,re_b,im_b,w\n");
    for ((a, b), v) in points.iter().zip(vals) {
        out.push_str(&format!("{:.6},{:.6},{:.6},{:.6},{:.9}\n", a.re, a.im, b.re, b.im, v?));
    }
    Ok(out)
}

/// Slice through the imaginary–imaginary plane of the joint Wigner function.
pub fn imaginary_plane(extent: f64, n: usize) -> Vec<(C64, C64)> {
    let step = if n > 1 { 2.0 * extent / (n - 1) as f64 } else { 0.0 };
    let axis: Vec<f64> = (0..n).map(|k| -extent + step * k as f64).collect();
    axis.iter()
        .flat_map(|&yb| axis.iter().map(move |&ya| (C64::new(0.0, ya), C64::new(0.0, yb))))
        .collect()
}
