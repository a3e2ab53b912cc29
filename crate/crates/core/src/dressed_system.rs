//! Cavity–coupler dressing, Kerr predictions, the pumped beamsplitter
//! rate with higher odd orders, and design formulas for inherited
//! decoherence and pump delivery.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit_model::CouplerSpectrum;
use crate::error::{Error, Result};
use crate::units::TWO_PI;

/// Largest |g/Δ| accepted by the dispersive formulas.
pub const DISPERSIVE_GUARD: f64 = 0.2;
/// Default resonance guard, MHz.
pub const RESONANCE_GUARD_MHZ: f64 = 1.0;
/// Default highest odd order kept in the beamsplitter series.
pub const MAX_BS_ORDER: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCoupling {
    /// MHz.
    pub g_a: f64,
    /// MHz.
    pub g_b: f64,
    /// Bare cavity frequencies, GHz.
    pub omega_a_bare: f64,
    pub omega_b_bare: f64,
}

impl LinearCoupling {
    pub fn device() -> Self {
        Self { g_a: 75.6, g_b: 134.9, omega_a_bare: 2.976018, omega_b_bare: 6.915945 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoherence {
    pub t1_a: f64,
    pub tphi_a: f64,
    pub t1_b: f64,
    pub tphi_b: f64,
    pub t1_qa: f64,
    pub tphi_qa: f64,
    pub t1_qb: f64,
    pub tphi_qb: f64,
}

impl Decoherence {
    /// Measured time scales, μs.
    pub fn device() -> Self {
        Self {
            t1_a: 482.0,
            tphi_a: 2010.0,
            t1_b: 91.0,
            tphi_b: 840.0,
            t1_qa: 127.2,
            tphi_qa: 208.0,
            t1_qb: 57.1,
            tphi_qb: 113.0,
        }
    }

    /// One-sigma uncertainties of [`Decoherence::device`], μs.
    pub fn device_sigma() -> Self {
        Self {
            t1_a: 6.0,
            tphi_a: 70.0,
            t1_b: 3.0,
            tphi_b: 60.0,
            t1_qa: 0.9,
            tphi_qa: 6.0,
            t1_qb: 0.6,
            tphi_qb: 3.0,
        }
    }

    pub fn ideal() -> Self {
        let inf = f64::INFINITY;
        Self { t1_a: inf, tphi_a: inf, t1_b: inf, tphi_b: inf, t1_qa: inf, tphi_qa: inf, t1_qb: inf, tphi_qb: inf }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.t1_a, self.tphi_a, self.t1_b, self.tphi_b, self.t1_qa, self.tphi_qa, self.t1_qb, self.tphi_qb,
        ];
        if all.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidInput("coherence times must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    /// Dressed cavity frequencies, GHz.
    pub omega_a: f64,
    pub omega_b: f64,
    /// Dispersive shifts to the respective transmons, MHz.
    pub chi_a: f64,
    pub chi_b: f64,
    /// Self-Kerrs, kHz.
    pub k_a: f64,
    pub k_b: f64,
    /// Cavity–cavity cross-Kerr, kHz.
    pub chi_ab: f64,
    /// Cavity–coupler cross-Kerrs, kHz.
    pub chi_ac: f64,
    pub chi_bc: f64,
    /// Sixth-order control-conditioned Kerr of cavity B, kHz.
    pub chi_prime_bc: f64,
    pub decoherence: Decoherence,
    /// Transmon anharmonicities, MHz.
    pub alpha_qt_a: f64,
    pub alpha_qt_b: f64,
}

impl SystemModel {
    pub fn device() -> Self {
        Self {
            omega_a: 2.976018,
            omega_b: 6.915945,
            chi_a: -0.7664,
            chi_b: -1.104,
            k_a: -0.8,
            k_b: -3.0,
            chi_ab: -0.39,
            chi_ac: 0.0,
            chi_bc: 0.0,
            chi_prime_bc: 0.9,
            decoherence: Decoherence::device(),
            alpha_qt_a: -181.2537,
            alpha_qt_b: -184.2860,
        }
    }

    /// Same Hamiltonian without parasitic Kerr-type terms.
    pub fn without_kerr(mut self) -> Self {
        self.k_a = 0.0;
        self.k_b = 0.0;
        self.chi_ab = 0.0;
        self.chi_prime_bc = 0.0;
        self
    }

    pub fn closed(mut self) -> Self {
        self.decoherence = Decoherence::ideal();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.decoherence.validate()?;
        let all = [
            self.omega_a, self.omega_b, self.chi_a, self.chi_b, self.k_a, self.k_b, self.chi_ab, self.chi_ac,
            self.chi_bc, self.chi_prime_bc, self.alpha_qt_a, self.alpha_qt_b,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("system model coefficients must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    pub xi: Complex64,
    /// GHz.
    pub omega_p: f64,
    /// MHz.
    pub delta: f64,
}

fn guard_mode(mode: &str, g_mhz: f64, omega_bare: f64, omega_c: f64) -> Result<()> {
    let delta_mhz = (omega_bare - omega_c) * 1e3;
    let ratio = (g_mhz / delta_mhz).abs();
    if !(ratio < DISPERSIVE_GUARD) {
        return Err(Error::DispersiveViolation { mode: mode.into(), ratio });
    }
    Ok(())
}

pub fn dispersive_guard(lc: &LinearCoupling, omega_c: f64) -> Result<()> {
    guard_mode("a", lc.g_a, lc.omega_a_bare, omega_c)?;
    guard_mode("b", lc.g_b, lc.omega_b_bare, omega_c)
}

/// Dressed frequency of one mode, GHz.
pub fn dressed_frequency(g_mhz: f64, omega_bare: f64, omega_c: f64) -> f64 {
    let g = g_mhz * 1e-3;
    omega_bare - g * g / (omega_c - omega_bare)
}

/// (ω_a, ω_b) in GHz for a coupler at ω_c (GHz).
pub fn dressed_frequencies(lc: &LinearCoupling, omega_c: f64) -> Result<(f64, f64)> {
    dispersive_guard(lc, omega_c)?;
    Ok((
        dressed_frequency(lc.g_a, lc.omega_a_bare, omega_c),
        dressed_frequency(lc.g_b, lc.omega_b_bare, omega_c),
    ))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModeCouplingFit {
    pub g_mhz: f64,
    pub omega_bare_ghz: f64,
    pub sigma_g_mhz: f64,
    pub sigma_omega_ghz: f64,
}

/// Fits (g, Ω) of one cavity to dressed-frequency vs coupler-frequency data (GHz).
pub fn fit_mode_coupling(data: &[(f64, f64)], g0_mhz: f64, omega0_ghz: f64) -> Result<ModeCouplingFit> {
    if data.len() < 3 {
        return Err(Error::InvalidInput("need ≥ 3 samples".into()));
    }
    let res = crate::fit::levenberg_marquardt(
        |p| data.iter().map(|&(wc, w)| dressed_frequency(p[0], p[1], wc) - w).collect(),
        &[g0_mhz, omega0_ghz],
        crate::fit::FitOptions::default(),
    )?;
    Ok(ModeCouplingFit {
        g_mhz: res.params[0].abs(),
        omega_bare_ghz: res.params[1],
        sigma_g_mhz: res.sigma[0],
        sigma_omega_ghz: res.sigma[1],
    })
}

/// Fits both modes; returns the coupling and the per-mode fits.
pub fn fit_linear_coupling(
    data_a: &[(f64, f64)],
    data_b: &[(f64, f64)],
    initial: &LinearCoupling,
) -> Result<(LinearCoupling, ModeCouplingFit, ModeCouplingFit)> {
    let fa = fit_mode_coupling(data_a, initial.g_a, initial.omega_a_bare)?;
    let fb = fit_mode_coupling(data_b, initial.g_b, initial.omega_b_bare)?;
    let lc = LinearCoupling {
        g_a: fa.g_mhz,
        g_b: fb.g_mhz,
        omega_a_bare: fa.omega_bare_ghz,
        omega_b_bare: fb.omega_bare_ghz,
    };
    Ok((lc, fa, fb))
}

fn check_denominator(context: &str, value_ghz: f64, guard_mhz: f64) -> Result<()> {
    if (value_ghz * 1e3).abs() < guard_mhz {
        return Err(Error::ResonantDenominator {
            context: context.into(),
            value_mhz: value_ghz * 1e3,
            guard_mhz,
        });
    }
    Ok(())
}

/// Participation factors (g_a/Δ_a, g_b/Δ_b) with dressed detunings.
pub fn participations(spec: &CouplerSpectrum, lc: &LinearCoupling) -> Result<(f64, f64, f64, f64)> {
    let (wa, wb) = dressed_frequencies(lc, spec.omega_c)?;
    let xa = lc.g_a * 1e-3 / (wa - spec.omega_c);
    let xb = lc.g_b * 1e-3 / (wb - spec.omega_c);
    Ok((xa, xb, wa, wb))
}

/// Cavity–cavity cross-Kerr χ_ab in kHz.
pub fn predict_cross_kerr(spec: &CouplerSpectrum, lc: &LinearCoupling) -> Result<f64> {
    predict_cross_kerr_guarded(spec, lc, RESONANCE_GUARD_MHZ)
}

pub fn predict_cross_kerr_guarded(spec: &CouplerSpectrum, lc: &LinearCoupling, guard_mhz: f64) -> Result<f64> {
    let (xa, xb, wa, wb) = participations(spec, lc)?;
    let wc = spec.omega_c;
    let dens = [wa - wb - wc, -wa + wb - wc, wa + wb - wc, -wa - wb - wc];
    let mut inv = 0.0;
    for d in dens {
        check_denominator("cross-Kerr", d, guard_mhz)?;
        inv += 1.0 / d;
    }
    let g3 = spec.g3();
    let second = if g3 == 0.0 {
        0.0
    } else {
        check_denominator("cross-Kerr harmonic sum", 1.0 / inv, guard_mhz)?;
        36.0 * g3 * g3 * inv
    };
    Ok((24.0 * spec.g4() + second) * xa * xa * xb * xb * 1e6)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cavity {
    A,
    B,
}

/// Cavity self-Kerr in kHz, including the transmon contribution χ²/4α.
pub fn predict_self_kerr(
    spec: &CouplerSpectrum,
    lc: &LinearCoupling,
    cavity: Cavity,
    chi_at_mhz: f64,
    alpha_at_mhz: f64,
) -> Result<f64> {
    let (xa, xb, wa, wb) = participations(spec, lc)?;
    let (x, w) = match cavity {
        Cavity::A => (xa, wa),
        Cavity::B => (xb, wb),
    };
    let wc = spec.omega_c;
    check_denominator("self-Kerr 2ω − ω_c", 2.0 * w - wc, RESONANCE_GUARD_MHZ)?;
    let g3 = spec.g3();
    let coupler = (12.0 * spec.g4() - 18.0 * g3 * g3 * (2.0 * wc / (4.0 * w * w - wc * wc) + 4.0 / wc)) * x.powi(4);
    let transmon = if chi_at_mhz == 0.0 { 0.0 } else { chi_at_mhz * chi_at_mhz / (4.0 * alpha_at_mhz) * 1e-3 };
    Ok((coupler + transmon) * 1e6)
}

/// Exact-diagonalization oracle for (χ_ab, K_a, K_b) in kHz: bare cavities
/// coupled by exchange to a coupler with cubic and quartic terms.
pub fn exact_kerrs(spec: &CouplerSpectrum, lc: &LinearCoupling, dims: (usize, usize, usize)) -> Result<(f64, f64, f64)> {
    let (da, db, dc) = dims;
    let d = da * db * dc;
    let idx = |na: usize, nb: usize, nc: usize| (na * db + nb) * dc + nc;
    let mut h = DMatrix::<f64>::zeros(d, d);
    let mut xc = DMatrix::<f64>::zeros(dc, dc);
    for n in 1..dc {
        let s = (n as f64).sqrt();
        xc[(n - 1, n)] = s;
        xc[(n, n - 1)] = s;
    }
    let x3 = &xc * &xc * &xc;
    let x4 = &x3 * &xc;
    let (ga, gb) = (lc.g_a * 1e-3, lc.g_b * 1e-3);
    for na in 0..da {
        for nb in 0..db {
            for i in 0..dc {
                let r = idx(na, nb, i);
                h[(r, r)] += lc.omega_a_bare * na as f64 + lc.omega_b_bare * nb as f64 + spec.omega_c * i as f64;
                for j in 0..dc {
                    h[(r, idx(na, nb, j))] += spec.g3() * x3[(i, j)] + spec.g4() * x4[(i, j)];
                }
                // a† c + h.c.
                if na + 1 < da && i >= 1 {
                    let v = ga * ((na + 1) as f64).sqrt() * (i as f64).sqrt();
                    let c = idx(na + 1, nb, i - 1);
                    h[(c, r)] += v;
                    h[(r, c)] += v;
                }
                if nb + 1 < db && i >= 1 {
                    let v = gb * ((nb + 1) as f64).sqrt() * (i as f64).sqrt();
                    let c = idx(na, nb + 1, i - 1);
                    h[(c, r)] += v;
                    h[(r, c)] += v;
                }
            }
        }
    }
    let eig = h.symmetric_eigen();
    let energy = |k: usize| {
        let mut best = 0;
        let mut w = -1.0;
        for j in 0..d {
            let v = eig.eigenvectors[(k, j)].powi(2);
            if v > w {
                w = v;
                best = j;
            }
        }
        eig.eigenvalues[best]
    };
    let e00 = energy(idx(0, 0, 0));
    let e10 = energy(idx(1, 0, 0));
    let e01 = energy(idx(0, 1, 0));
    let e11 = energy(idx(1, 1, 0));
    let chi = e11 - e10 - e01 + e00;
    let ka = if da > 2 { energy(idx(2, 0, 0)) - 2.0 * e10 + e00 } else { f64::NAN };
    let kb = if db > 2 { energy(idx(0, 2, 0)) - 2.0 * e01 + e00 } else { f64::NAN };
    Ok((chi * 1e6, ka * 1e6, kb * 1e6))
}

/// ξ_crit = 3π/(2φ_c).
pub fn critical_amplitude(spec: &CouplerSpectrum) -> f64 {
    3.0 * std::f64::consts::PI / (2.0 * spec.phi_zpf)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Pumped beamsplitter rate (complex, MHz) including odd orders up to
/// `max_order` (≤ 17 and ≤ the spectrum's order).
pub fn beamsplitter_rate(
    spec: &CouplerSpectrum,
    lc: &LinearCoupling,
    pump: &PumpConfig,
    max_order: usize,
) -> Result<Complex64> {
    let xi_abs = pump.xi.norm();
    let xi_crit = critical_amplitude(spec);
    if !(xi_abs < xi_crit) {
        return Err(Error::AmplitudeAboveCritical { xi: xi_abs, xi_crit });
    }
    let (xa, xb, _, _) = participations(spec, lc)?;
    let top = max_order.min(MAX_BS_ORDER).min(spec.max_order());
    let mut sum = 0.0;
    let mut m = 1;
    while 2 * m < top {
        let coeff = factorial(2 * m + 1) / (factorial(m) * factorial(m - 1));
        sum += coeff * spec.g(2 * m + 1) * xi_abs.powi(2 * m as i32 - 2);
        m += 1;
    }
    Ok(pump.xi.conj() * (xa * xb * sum * 1e3))
}

/// Leading-order rate 6(g_a/Δ_a)(g_b/Δ_b)ξ g₃ in MHz (magnitude sense).
pub fn beamsplitter_rate_leading(spec: &CouplerSpectrum, lc: &LinearCoupling, xi: f64) -> Result<f64> {
    let (xa, xb, _, _) = participations(spec, lc)?;
    Ok(6.0 * xa * xb * xi * spec.g3() * 1e3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseModel {
    White,
    Pink,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InheritedRates {
    /// 1/μs.
    pub kappa: f64,
    pub kappa_phi: f64,
}

/// Decay and dephasing inherited by each cavity from the coupler.
pub fn inherited_decoherence(
    lc: &LinearCoupling,
    spec: &CouplerSpectrum,
    gamma_c: f64,
    gamma_c_phi: f64,
    noise: NoiseModel,
) -> Result<(InheritedRates, InheritedRates)> {
    let (xa, xb, _, _) = participations(spec, lc)?;
    let rates = |x: f64| {
        let x2 = x * x;
        InheritedRates {
            kappa: x2 * gamma_c,
            kappa_phi: match noise {
                NoiseModel::White => x2 * x2 * gamma_c_phi,
                NoiseModel::Pink => x2 * gamma_c_phi,
            },
        }
    };
    Ok((rates(xa), rates(xb)))
}

const HBAR: f64 = 1.054_571_817e-34;

/// |ξ| delivered by a pump of `power_w` through a two-port with impedances
/// Z₁₁, Z₂₁ (Ω); frequencies in GHz, L_s in H, Φ_zpf in Wb.
#[allow(clippy::too_many_arguments)]
pub fn xi_from_network(
    z11: Complex64,
    z21: Complex64,
    rs: f64,
    power_w: f64,
    omega_p_ghz: f64,
    omega_c_ghz: f64,
    ls: f64,
    phi_zpf_flux: f64,
) -> Result<f64> {
    let finite = [z11.re, z11.im, z21.re, z21.im, rs, power_w, omega_p_ghz, omega_c_ghz, ls, phi_zpf_flux];
    if finite.iter().any(|x| !x.is_finite()) || rs <= 0.0 || power_w < 0.0 || ls <= 0.0 || phi_zpf_flux <= 0.0 {
        return Err(Error::InvalidInput("network inputs must be finite and positive".into()));
    }
    let wp = TWO_PI * omega_p_ghz * 1e9;
    let wc = TWO_PI * omega_c_ghz * 1e9;
    if wp <= 0.0 || wp == wc {
        return Err(Error::InvalidInput("pump must be positive and detuned from the coupler".into()));
    }
    let divider = (z21 / (z11 + rs)).norm();
    Ok(divider * (power_w * rs).sqrt() * phi_zpf_flux / (HBAR * wp * ls * (wp - wc).abs()))
}

/// g_bs/|χ_ab|, both given in the same units.
pub fn on_off_ratio(g_bs: f64, chi_ab: f64) -> f64 {
    g_bs.abs() / chi_ab.abs()
}

/// Composite decoherence time 1/τ_bs = 1/τ + 1/(2τ_φ).
pub fn composite_time(tau: f64, tau_phi: f64) -> f64 {
    1.0 / (1.0 / tau + 0.5 / tau_phi)
}

/// 50:50 beamsplitter time π/(4g) in μs for g in MHz.
pub fn t_bs(g_bs_mhz: f64) -> f64 {
    std::f64::consts::PI / (4.0 * TWO_PI * g_bs_mhz.abs())
}

/// Beamsplitters per coherence time, τ_bs/t_bs.
pub fn bs_per_coherence(g_bs_mhz: f64, tau: f64, tau_phi: f64) -> f64 {
    composite_time(tau, tau_phi) / t_bs(g_bs_mhz)
}
