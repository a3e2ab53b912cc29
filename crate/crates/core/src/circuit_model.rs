//! SNAIL coupler: potential expansion about the flux-dependent minimum,
//! renormalization by the series linear inductance, quantization, and
//! circuit-parameter fits to coupler-frequency data.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, FitOptions};
use crate::units::TWO_PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnailCircuit {
    /// Josephson energy of the large junctions, GHz·h.
    pub ej: f64,
    /// Linear inductive energy, GHz·h.
    pub el: f64,
    /// Charging energy, GHz·h.
    pub ec: f64,
    pub beta: f64,
    pub m_junctions: u32,
    pub n_snails: u32,
    /// External flux in units of Φ₀.
    pub phi_e: f64,
}

impl SnailCircuit {
    /// Parameters fitted to the measured coupler frequency of the device.
    pub fn device() -> Self {
        Self { ej: 90.0, el: 64.0, ec: 0.177, beta: 0.147, m_junctions: 3, n_snails: 1, phi_e: 0.0 }
    }

    pub fn at_flux(mut self, phi_e: f64) -> Self {
        self.phi_e = phi_e;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ej > 0.0 && self.el > 0.0 && self.ec > 0.0) {
            return Err(Error::InvalidInput("ej, el, ec must be positive".into()));
        }
        if self.m_junctions == 0 || self.n_snails == 0 {
            return Err(Error::InvalidInput("junction and SNAIL counts must be positive".into()));
        }
        let limit = 1.0 / self.m_junctions as f64;
        if !(self.beta > 0.0) {
            return Err(Error::InvalidInput("beta must be positive".into()));
        }
        if self.beta >= limit {
            return Err(Error::MultiStableRegime { beta: self.beta, limit });
        }
        if !self.phi_e.is_finite() {
            return Err(Error::InvalidInput("phi_e must be finite".into()));
        }
        Ok(())
    }

    fn m(&self) -> f64 {
        self.m_junctions as f64
    }

    fn phase_ext(&self) -> f64 {
        TWO_PI * self.phi_e
    }

    /// U_s(φ)/E_J for a single SNAIL.
    pub fn potential(&self, phi: f64) -> f64 {
        let m = self.m();
        -self.beta * (phi - self.phase_ext()).cos() - m * (phi / m).cos()
    }

    /// dU_s/dφ divided by E_J.
    pub fn potential_slope(&self, phi: f64) -> f64 {
        let m = self.m();
        self.beta * (phi - self.phase_ext()).sin() + (phi / m).sin()
    }

    /// n-th derivative of U_s/E_J, exact.
    pub fn potential_derivative(&self, phi: f64, n: u32) -> f64 {
        let m = self.m();
        let shift = n as f64 * std::f64::consts::FRAC_PI_2;
        -self.beta * (phi - self.phase_ext() + shift).cos()
            - m.powi(1 - n as i32) * (phi / m + shift).cos()
    }
}

/// Phase of the potential minimum of a single SNAIL (radians).
pub fn solve_potential_minimum(circuit: &SnailCircuit) -> Result<f64> {
    solve_potential_minimum_seeded(circuit, None)
}

/// As [`solve_potential_minimum`], seeding Newton's method (e.g. from the
/// neighbouring flux point of a sweep). Falls back to bisection.
pub fn solve_potential_minimum_seeded(circuit: &SnailCircuit, seed: Option<f64>) -> Result<f64> {
    circuit.validate()?;
    let m = circuit.m();
    // All roots of the slope satisfy |sin(φ/M)| ≤ β; with β < 1/M there is
    // exactly one in this bracket and it is a minimum.
    let half = m * circuit.beta.asin() * (1.0 + 1e-9) + 1e-12;
    let (mut lo, mut hi) = (-half, half);
    let f = |x: f64| circuit.potential_slope(x);
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::NonConvergence("minimum not bracketed".into()));
    }
    let mut x = seed.unwrap_or(0.0).clamp(lo, hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() < 1e-14 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d2 = circuit.potential_derivative(x, 2);
        let newton = x - fx / d2;
        x = if d2 > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            break;
        }
    }
    if f(x).abs() < 1e-12 {
        Ok(x)
    } else {
        Err(Error::NonConvergence(format!("slope {} at φ = {x}", f(x))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialExpansion {
    pub phi_m: f64,
    /// Bare coefficients indexed by order; entries 0 and 1 are U(φ_m) and 0.
    pub c: Vec<f64>,
    /// Renormalized coefficients indexed by order (0 and 1 unused).
    pub c_tilde: Vec<f64>,
    pub p: f64,
}

impl PotentialExpansion {
    pub fn nmax(&self) -> usize {
        self.c.len() - 1
    }
}

type Series = Vec<f64>;

fn series_mul(a: &[f64], b: &[f64], order: usize) -> Series {
    let mut out = vec![0.0; order + 1];
    for (i, &ai) in a.iter().enumerate().take(order + 1) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Compositional inverse of y = Σ b_k x^k (b_0 = 0, b_1 ≠ 0).
fn series_revert(b: &[f64], order: usize) -> Series {
    let mut d = vec![0.0; order + 1];
    d[1] = 1.0 / b[1];
    for k in 2..=order {
        let mut z = 0.0;
        let mut pw = d.clone();
        for bj in b.iter().take(k + 1).skip(1) {
            z += bj * pw[k];
            pw = series_mul(&pw, &d, order);
        }
        d[k] = -z / b[1];
    }
    d
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Taylor coefficients about φ_m and their renormalization by the series
/// linear inductance.
pub fn taylor_coefficients(circuit: &SnailCircuit, phi_m: f64, nmax: usize) -> Result<PotentialExpansion> {
    circuit.validate()?;
    if nmax < 4 {
        return Err(Error::InvalidInput("nmax must be at least 4".into()));
    }
    let n_s = circuit.n_snails as f64;
    let mut c = vec![0.0; nmax + 2];
    c[0] = n_s * circuit.potential(phi_m);
    for (n, cn) in c.iter_mut().enumerate().skip(2) {
        // An array of N identical SNAILs sharing the phase: N·U(φ/N).
        *cn = n_s.powi(1 - n as i32) * circuit.potential_derivative(phi_m, n as u32);
    }
    if c[2] <= 0.0 {
        return Err(Error::UnstablePotential(c[2]));
    }
    let ell = circuit.el / circuit.ej;
    let p = circuit.el / (circuit.el + c[2] * circuit.ej);

    // Internal node x, total phase y: U'(x) = ℓ(y − x) gives y(x) explicitly;
    // reverting it and using dŨ/dy = ℓ(y − x(y)) yields Ũ.
    let order = nmax - 1;
    let mut y_of_x = vec![0.0; order + 1];
    y_of_x[1] = 1.0 + c[2] / ell;
    for k in 2..=order {
        y_of_x[k] = c[k + 1] / factorial(k) / ell;
    }
    let x_of_y = series_revert(&y_of_x, order);
    let mut c_tilde = vec![0.0; nmax + 1];
    for n in 2..=nmax {
        let k = n - 1;
        // ℓ(1 − x₁) equals c₂·p; the product form avoids cancellation at large ℓ.
        let slope_coeff = if k == 1 { c[2] * p } else { -ell * x_of_y[k] };
        c_tilde[n] = slope_coeff * factorial(k);
    }
    c.truncate(nmax + 1);
    Ok(PotentialExpansion { phi_m, c, c_tilde, p })
}

/// Closed-form bare coefficients for n = 2…5, simplified with the
/// stationarity condition at φ_m (single SNAIL).
pub fn closed_form_c(circuit: &SnailCircuit, phi_m: f64, n: usize) -> Option<f64> {
    let m = circuit.m();
    let b = circuit.beta;
    let pe = circuit.phase_ext();
    let s = (phi_m / m).sin();
    match n {
        2 => Some(b * (phi_m - pe).cos() + (phi_m / m).cos() / m),
        3 => Some((m * m - 1.0) / (m * m) * s),
        4 => Some(-b * (phi_m - pe).cos() - (phi_m / m).cos() / m.powi(3)),
        5 => Some((1.0 - m.powi(4)) / m.powi(4) * s),
        _ => None,
    }
}

/// Closed-form renormalized coefficients for n = 2…5.
pub fn closed_form_c_tilde(exp: &PotentialExpansion, n: usize) -> Option<f64> {
    let c = &exp.c;
    let p = exp.p;
    let q = 1.0 - p;
    match n {
        2 => Some(p * c[2]),
        3 => Some(p.powi(3) * c[3]),
        4 => Some(p.powi(4) * (c[4] - 3.0 * c[3] * c[3] / c[2] * q)),
        5 => Some(
            p.powi(5)
                * (c[5] - 10.0 * c[4] * c[3] / c[2] * q + 15.0 * c[3].powi(3) / (c[2] * c[2]) * q * q),
        ),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplerSpectrum {
    pub phi_e: f64,
    /// GHz.
    pub omega_c: f64,
    pub phi_zpf: f64,
    /// gₙ in GHz indexed by order (entries 0…2 unused).
    pub g: Vec<f64>,
    /// GHz.
    pub alpha_c: f64,
}

impl CouplerSpectrum {
    pub fn g(&self, n: usize) -> f64 {
        self.g.get(n).copied().unwrap_or(0.0)
    }
    pub fn g3(&self) -> f64 {
        self.g(3)
    }
    pub fn g4(&self) -> f64 {
        self.g(4)
    }
    pub fn g5(&self) -> f64 {
        self.g(5)
    }
    pub fn max_order(&self) -> usize {
        self.g.len() - 1
    }
}

pub fn quantize(circuit: &SnailCircuit, exp: &PotentialExpansion, max_order: usize) -> Result<CouplerSpectrum> {
    let c2 = exp.c_tilde[2];
    if !(c2 > 0.0) {
        return Err(Error::UnstablePotential(c2));
    }
    if max_order > exp.nmax() || max_order < 4 {
        return Err(Error::InvalidInput(format!(
            "max_order {max_order} outside 4..={}",
            exp.nmax()
        )));
    }
    let omega_c = (8.0 * c2 * circuit.ec * circuit.ej).sqrt();
    let phi_zpf = (2.0 * circuit.ec / (c2 * circuit.ej)).powf(0.25);
    let mut g = vec![0.0; max_order + 1];
    for (n, gn) in g.iter_mut().enumerate().skip(3) {
        *gn = circuit.ej * phi_zpf.powi(n as i32) * exp.c_tilde[n] / factorial(n);
    }
    let alpha_c = 12.0 * (g[4] - 5.0 * g[3] * g[3] / omega_c);
    Ok(CouplerSpectrum { phi_e: circuit.phi_e, omega_c, phi_zpf, g, alpha_c })
}

/// Minimum, expansion and spectrum at the circuit's flux.
pub fn coupler_spectrum(circuit: &SnailCircuit, max_order: usize) -> Result<(PotentialExpansion, CouplerSpectrum)> {
    let phi_m = solve_potential_minimum(circuit)?;
    let exp = taylor_coefficients(circuit, phi_m, max_order)?;
    let spec = quantize(circuit, &exp, max_order)?;
    Ok((exp, spec))
}

/// Sequential flux sweep; each minimum seeds the next Newton solve.
pub fn flux_sweep(circuit: &SnailCircuit, fluxes: &[f64], max_order: usize) -> Vec<Result<CouplerSpectrum>> {
    let mut seed = None;
    fluxes
        .iter()
        .map(|&f| {
            let c = circuit.at_flux(f);
            let phi_m = solve_potential_minimum_seeded(&c, seed)?;
            seed = Some(phi_m);
            let exp = taylor_coefficients(&c, phi_m, max_order)?;
            quantize(&c, &exp, max_order)
        })
        .collect()
}

/// E_ef − E_ge of ω c†c + g₃(c+c†)³ + g₄(c+c†)⁴ by exact diagonalization (GHz).
pub fn exact_anharmonicity(spec: &CouplerSpectrum, dim: usize) -> Result<f64> {
    if dim < 6 {
        return Err(Error::InvalidInput("Fock dimension too small".into()));
    }
    let mut x = DMatrix::<f64>::zeros(dim, dim);
    for n in 1..dim {
        let s = (n as f64).sqrt();
        x[(n - 1, n)] = s;
        x[(n, n - 1)] = s;
    }
    let x2 = &x * &x;
    let x3 = &x2 * &x;
    let x4 = &x2 * &x2;
    let mut h = x3 * spec.g3() + x4 * spec.g4();
    for n in 0..dim {
        h[(n, n)] += spec.omega_c * n as f64;
    }
    let eig = h.symmetric_eigen();
    let level = |k: usize| {
        let mut best = 0;
        let mut w = -1.0;
        for j in 0..dim {
            let v = eig.eigenvectors[(k, j)].powi(2);
            if v > w {
                w = v;
                best = j;
            }
        }
        eig.eigenvalues[best]
    };
    let (e0, e1, e2) = (level(0), level(1), level(2));
    Ok((e2 - e1) - (e1 - e0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircuitFit {
    pub circuit: SnailCircuit,
    /// One-sigma uncertainties of (E_J, E_L, E_C, β); zero for held parameters.
    pub sigma: [f64; 4],
    pub rms_residual_ghz: f64,
}

/// Which of (E_J, E_L, E_C, β) are free in [`fit_circuit`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CircuitFitMask(pub [bool; 4]);

impl Default for CircuitFitMask {
    /// ω_c(Φ) only constrains E_C·E_J, E_L/E_J and β, so E_J is held at its
    /// initial value unless explicitly freed.
    fn default() -> Self {
        Self([false, true, true, true])
    }
}

fn model_omega(c: &SnailCircuit, phi_e: f64) -> Result<f64> {
    Ok(coupler_spectrum(&c.at_flux(phi_e), 4)?.1.omega_c)
}

/// Least-squares fit of coupler frequency vs flux.
pub fn fit_circuit(data: &[(f64, f64)], initial: &SnailCircuit, mask: CircuitFitMask) -> Result<CircuitFit> {
    let mut fluxes: Vec<f64> = data.iter().map(|d| d.0).collect();
    fluxes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    fluxes.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if data.len() < 4 || fluxes.len() < 4 {
        return Err(Error::InvalidInput("need ≥ 4 samples at distinct fluxes".into()));
    }
    initial.validate()?;
    let base = [initial.ej, initial.el, initial.ec, initial.beta];
    let free: Vec<usize> = (0..4).filter(|&i| mask.0[i]).collect();
    let build = |q: &[f64]| {
        let mut v = base;
        for (k, &i) in free.iter().enumerate() {
            v[i] = q[k];
        }
        SnailCircuit { ej: v[0], el: v[1], ec: v[2], beta: v[3], ..*initial }
    };
    let residuals = |q: &[f64]| -> Vec<f64> {
        let c = build(q);
        data.iter()
            .map(|&(f, w)| match model_omega(&c, f) {
                Ok(m) => m - w,
                Err(_) => 1e6,
            })
            .collect()
    };
    let q0: Vec<f64> = free.iter().map(|&i| base[i]).collect();
    let res = levenberg_marquardt(residuals, &q0, FitOptions::default())?;
    let circuit = build(&res.params);
    circuit.validate()?;
    let mut sigma = [0.0; 4];
    for (k, &i) in free.iter().enumerate() {
        sigma[i] = res.sigma[k];
    }
    let rms = (res.ssr / data.len() as f64).sqrt();
    Ok(CircuitFit { circuit, sigma, rms_residual_ghz: rms })
}
