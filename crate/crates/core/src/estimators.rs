//! Data analysis on simulated or imported measurements: joint readout
//! correction, windowed beamsplitter fits and Kerr revival fits.
//!
//! Frequencies are in MHz (non-angular) and times in μs throughout.

use std::io::Read;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::dynamics::decay_envelope_model;
use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, linear_regression, FitOptions};
use crate::units::TWO_PI;

/// Corrected entries outside this band are flagged.
pub const CORRECTION_BAND: (f64, f64) = (-0.05, 1.05);

/// Single-ancilla readout model. `t_rate` = P(e|0), `f_rate` = P(e|1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub t_rate: f64,
    pub f_rate: f64,
}

impl ConfusionMatrix {
    pub fn new(t_rate: f64, f_rate: f64) -> Result<Self> {
        let c = Self { t_rate, f_rate };
        c.validate()?;
        Ok(c)
    }

    pub fn ideal() -> Self {
        Self { t_rate: 1.0, f_rate: 0.0 }
    }

    /// Rates taken from the extrema of a 0-selective Rabi oscillation.
    pub fn from_rabi_extrema(min_pe: f64, max_pe: f64) -> Result<Self> {
        Self::new(max_pe, min_pe)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.f_rate.is_finite() && self.t_rate.is_finite() && 0.0 <= self.f_rate && self.f_rate < self.t_rate && self.t_rate <= 1.0;
        if !ok {
            return Err(Error::InvalidInput(format!("need 0 ≤ f < t ≤ 1, got t = {}, f = {}", self.t_rate, self.f_rate)));
        }
        Ok(())
    }

    /// Rows index the outcome (e, g), columns the photon number (0, 1).
    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.t_rate, self.f_rate, 1.0 - self.t_rate, 1.0 - self.f_rate)
    }

    pub fn determinant(&self) -> f64 {
        self.t_rate - self.f_rate
    }
}

/// Measured joint outcome probabilities Q(i, j), i for ancilla A, j for B,
/// both ordered (e, g).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointCounts {
    pub q: Matrix2<f64>,
    pub shots: u64,
}

impl JointCounts {
    pub fn new(q: Matrix2<f64>, shots: u64) -> Result<Self> {
        if q.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput("joint probabilities must be finite and ≥ 0".into()));
        }
        if (q.sum() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("joint probabilities sum to {}", q.sum())));
        }
        Ok(Self { q, shots })
    }

    /// Normalizes raw shot counts.
    pub fn from_counts(counts: [[u64; 2]; 2]) -> Result<Self> {
        let shots: u64 = counts.iter().flatten().sum();
        if shots == 0 {
            return Err(Error::InvalidInput("no shots".into()));
        }
        let n = shots as f64;
        let q = Matrix2::new(counts[0][0] as f64 / n, counts[0][1] as f64 / n, counts[1][0] as f64 / n, counts[1][1] as f64 / n);
        Self::new(q, shots)
    }
}

/// Readout-corrected joint distribution P(n, m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedJoint {
    pub p: Matrix2<f64>,
    /// Set when some entry falls outside [`CORRECTION_BAND`]; entries are never clipped.
    pub out_of_band: bool,
}

/// Forward model Q = E_A P E_Bᵀ.
pub fn forward_joint(p: &Matrix2<f64>, ea: &ConfusionMatrix, eb: &ConfusionMatrix) -> Matrix2<f64> {
    ea.matrix() * p * eb.matrix().transpose()
}

/// P = E_A⁻¹ Q (E_Bᵀ)⁻¹.
pub fn correct_joint(q: &JointCounts, ea: &ConfusionMatrix, eb: &ConfusionMatrix) -> Result<CorrectedJoint> {
    let inv = |c: &ConfusionMatrix| {
        let d = c.determinant();
        if d.abs() < 1e-12 {
            return Err(Error::SingularConfusion(d));
        }
        c.matrix().try_inverse().ok_or(Error::SingularConfusion(d))
    };
    let p = inv(ea)? * q.q * inv(eb)?.transpose();
    let out_of_band = p.iter().any(|x| *x < CORRECTION_BAND.0 || *x > CORRECTION_BAND.1);
    Ok(CorrectedJoint { p, out_of_band })
}

/// Value with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsSample {
    pub t_us: f64,
    pub p01: f64,
    pub p10: f64,
}

/// Fine windows of equally spaced samples centered on coarse times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub points_per_window: usize,
    pub width_us: f64,
    pub centers_us: Vec<f64>,
}

impl WindowSpec {
    /// 21 points over ≈ 6 t_bs, 41 centers up to ≈ 3 τ_bs.
    pub fn standard(g_bs_mhz: f64, tau_bs_us: f64) -> Self {
        let width = 6.0 * crate::dressed_system::t_bs(g_bs_mhz);
        let first = 0.5 * width;
        let last = (3.0 * tau_bs_us).max(first + width);
        let n = 41;
        let centers = (0..n).map(|k| first + (last - first) * k as f64 / (n - 1) as f64).collect();
        Self { points_per_window: 21, width_us: width, centers_us: centers }
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers_us.len() < 3 || self.points_per_window < 8 {
            return Err(Error::InvalidInput("need ≥ 3 windows of ≥ 8 points".into()));
        }
        if !(self.width_us > 0.0) || self.centers_us.iter().any(|c| *c < 0.5 * self.width_us) {
            return Err(Error::InvalidInput("windows must have positive width and start at t ≥ 0".into()));
        }
        Ok(())
    }

    /// All sample times in window order.
    pub fn times(&self) -> Vec<f64> {
        let n = self.points_per_window;
        self.centers_us
            .iter()
            .flat_map(|&c| (0..n).map(move |k| c - 0.5 * self.width_us + self.width_us * k as f64 / (n - 1) as f64))
            .collect()
    }
}

/// Noise-free samples of the single-photon exchange envelopes.
pub fn synthesize_windows(spec: &WindowSpec, g_bs_mhz: f64, theta: f64, tau: f64, tau_phi: f64) -> Vec<BsSample> {
    spec.times()
        .into_iter()
        .map(|t| {
            let (p01, p10) = decay_envelope_model(t, TWO_PI * g_bs_mhz, theta, tau, tau_phi);
            BsSample { t_us: t, p01, p10 }
        })
        .collect()
}

/// One window fitted to A sin(ωt + φ) + B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub center_us: f64,
    /// ω/(4π), i.e. g_bs in MHz.
    pub g_bs_mhz: Estimate,
    pub amplitude: Estimate,
    pub mean: Estimate,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFit {
    pub windows: Vec<WindowFit>,
    /// Decay of the window means.
    pub tau: Estimate,
    /// Decay of the window amplitudes, (1/τ + 1/τ_φ)⁻¹.
    pub tau_amplitude: Estimate,
    pub tau_phi: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamsplitterFit {
    pub g_bs_mhz: Estimate,
    pub tau: Estimate,
    pub tau_phi: Estimate,
    pub p01: ChannelFit,
    pub p10: ChannelFit,
}

// Linear least squares for a sin(ωt) + b cos(ωt) + c at fixed ω.
fn linear_sinusoid(t: &[f64], y: &[f64], w: f64) -> Option<([f64; 3], f64)> {
    let mut m = nalgebra::Matrix3::<f64>::zeros();
    let mut v = nalgebra::Vector3::<f64>::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let row = nalgebra::Vector3::new((w * ti).sin(), (w * ti).cos(), 1.0);
        m += row * row.transpose();
        v += row * yi;
    }
    let c = m.try_inverse()? * v;
    let ssr = t.iter().zip(y).map(|(&ti, &yi)| (c[0] * (w * ti).sin() + c[1] * (w * ti).cos() + c[2] - yi).powi(2)).sum();
    Some(([c[0], c[1], c[2]], ssr))
}

fn fit_window(t: &[f64], y: &[f64]) -> Result<WindowFit> {
    let n = t.len();
    let span = t[n - 1] - t[0];
    let dt = span / (n - 1) as f64;
    if !(span > 0.0) {
        return Err(Error::InvalidInput("window times must increase".into()));
    }
    let center = 0.5 * (t[0] + t[n - 1]);
    // Shift to the window center so the phase is well conditioned.
    let ts: Vec<f64> = t.iter().map(|x| x - center).collect();
    let (w_lo, w_hi) = (0.5 * TWO_PI / span, std::f64::consts::PI / dt);
    let grid = 400;
    let mut best: Option<(f64, [f64; 3], f64)> = None;
    for k in 0..=grid {
        let w = w_lo + (w_hi - w_lo) * k as f64 / grid as f64;
        if let Some((c, ssr)) = linear_sinusoid(&ts, y, w) {
            if best.is_none_or(|b| ssr < b.2) {
                best = Some((w, c, ssr));
            }
        }
    }
    let (w0, c0, _) = best.ok_or_else(|| Error::FitDiverged("no frequency candidate".into()))?;
    let a0 = c0[0].hypot(c0[1]);
    let phi0 = c0[1].atan2(c0[0]);
    let model = |p: &[f64]| -> Vec<f64> {
        ts.iter().zip(y).map(|(&ti, &yi)| p[0] * (p[1] * ti + p[2]).sin() + p[3] - yi).collect()
    };
    let mut fit = None;
    for s in 0..4 {
        let seed = [a0, w0, phi0 + s as f64 * 0.5 * std::f64::consts::PI, c0[2]];
        if let Ok(r) = levenberg_marquardt(model, &seed, FitOptions::default()) {
            // Samples cannot tell ω from its aliases 2π/dt ± ω; stay in the scanned band.
            if !(w_lo..=w_hi).contains(&r.params[1].abs()) {
                continue;
            }
            if fit.as_ref().is_none_or(|b: &crate::fit::FitResult| r.ssr < b.ssr) {
                fit = Some(r);
            }
        }
    }
    let r = fit.ok_or_else(|| Error::FitDiverged("sinusoid fit failed from every seed".into()))?;
    let (mut a, w, mut phi, b) = (r.params[0], r.params[1], r.params[2], r.params[3]);
    if a < 0.0 {
        a = -a;
        phi += std::f64::consts::PI;
    }
    if !(a.is_finite() && w.is_finite() && b.is_finite()) {
        return Err(Error::FitDiverged("non-physical fit result".into()));
    }
    let clean = |s: f64| if s.is_finite() { s } else { 0.0 };
    Ok(WindowFit {
        center_us: center,
        g_bs_mhz: Estimate::new(w.abs() / (2.0 * TWO_PI), clean(r.sigma[1]) / (2.0 * TWO_PI)),
        amplitude: Estimate::new(a, clean(r.sigma[0])),
        mean: Estimate::new(b, clean(r.sigma[3])),
        phase: crate::units::wrap_angle(phi),
    })
}

/// Weighted fit of y = y0 e^{−t/τ}; returns τ.
fn fit_exponential(t: &[f64], y: &[Estimate]) -> Result<Estimate> {
    let (tt, ly): (Vec<f64>, Vec<f64>) = t.iter().zip(y).filter(|(_, v)| v.value > 0.0).map(|(a, v)| (*a, v.value.ln())).unzip();
    let ((a, b), _) = linear_regression(&tt, &ly)?;
    if !(b < 0.0) {
        return Err(Error::FitDiverged("window envelope does not decay".into()));
    }
    let floor = 1e-12 * y.iter().map(|v| v.value.abs()).fold(0.0, f64::max);
    let r = levenberg_marquardt(
        |p: &[f64]| t.iter().zip(y).map(|(&ti, yi)| (p[0] * (-ti / p[1]).exp() - yi.value) / yi.sigma.max(floor)).collect(),
        &[a.exp(), -1.0 / b],
        FitOptions { absolute_sigma: true, ..FitOptions::default() },
    )?;
    let tau = r.params[1];
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::FitDiverged("non-physical decay time".into()));
    }
    Ok(Estimate::new(tau, if r.sigma[1].is_finite() { r.sigma[1] } else { 0.0 }))
}

fn fit_channel(samples: &[BsSample], n: usize, pick: fn(&BsSample) -> f64) -> Result<ChannelFit> {
    let windows = samples
        .chunks(n)
        .map(|w| {
            let t: Vec<f64> = w.iter().map(|s| s.t_us).collect();
            let y: Vec<f64> = w.iter().map(pick).collect();
            fit_window(&t, &y)
        })
        .collect::<Result<Vec<_>>>()?;
    let c: Vec<f64> = windows.iter().map(|w| w.center_us).collect();
    let means: Vec<Estimate> = windows.iter().map(|w| w.mean).collect();
    let amps: Vec<Estimate> = windows.iter().map(|w| w.amplitude).collect();
    let tau = fit_exponential(&c, &means)?;
    let tau_amplitude = fit_exponential(&c, &amps)?;
    let (ta, tb) = (tau_amplitude.value, tau.value);
    let rate = 1.0 / ta - 1.0 / tb;
    if !(rate > 0.0) {
        return Err(Error::FitDiverged("non-physical fit result".into()));
    }
    let tp = 1.0 / rate;
    let sigma = tp * tp * ((tau_amplitude.sigma / (ta * ta)).powi(2) + (tau.sigma / (tb * tb)).powi(2)).sqrt();
    Ok(ChannelFit { windows, tau, tau_amplitude, tau_phi: Estimate::new(tp, sigma) })
}

fn average(a: Estimate, b: Estimate) -> Estimate {
    Estimate::new(0.5 * (a.value + b.value), 0.5 * a.sigma.hypot(b.sigma))
}

fn consistent(a: Estimate, b: Estimate) -> bool {
    // The per-window envelope model is exact only to ~1e-3, so residual
    // sigmas on clean data are floored there.
    let s = a.sigma.hypot(b.sigma).max(1e-3 * a.value.abs());
    (a.value - b.value).abs() <= 3.0 * s
}

/// Windowed fit of (g_bs, τ, τ_φ). Consecutive runs of `points_per_window`
/// samples form one window.
pub fn fit_beamsplitter_windows(samples: &[BsSample], points_per_window: usize) -> Result<BeamsplitterFit> {
    if points_per_window < 8 || !samples.len().is_multiple_of(points_per_window) || samples.len() / points_per_window < 3 {
        return Err(Error::InvalidInput("need ≥ 3 complete windows of ≥ 8 points".into()));
    }
    if samples.iter().any(|s| !(s.t_us.is_finite() && s.p01.is_finite() && s.p10.is_finite())) {
        return Err(Error::InvalidInput("non-finite sample".into()));
    }
    let p01 = fit_channel(samples, points_per_window, |s| s.p01)?;
    let p10 = fit_channel(samples, points_per_window, |s| s.p10)?;
    if !consistent(p01.tau, p10.tau) || !consistent(p01.tau_amplitude, p10.tau_amplitude) {
        return Err(Error::InconsistentChannels(format!(
            "τ = {:.4} ± {:.4} vs {:.4} ± {:.4}; amplitude τ = {:.4} ± {:.4} vs {:.4} ± {:.4}",
            p01.tau.value,
            p01.tau.sigma,
            p10.tau.value,
            p10.tau.sigma,
            p01.tau_amplitude.value,
            p01.tau_amplitude.sigma,
            p10.tau_amplitude.value,
            p10.tau_amplitude.sigma
        )));
    }
    let all: Vec<Estimate> = p01.windows.iter().chain(&p10.windows).map(|w| w.g_bs_mhz).collect();
    let m = all.len() as f64;
    let g = all.iter().map(|e| e.value).sum::<f64>() / m;
    let spread = (all.iter().map(|e| (e.value - g).powi(2)).sum::<f64>() / (m - 1.0)).sqrt() / m.sqrt();
    Ok(BeamsplitterFit {
        g_bs_mhz: Estimate::new(g, spread),
        tau: average(p01.tau, p10.tau),
        tau_phi: average(p01.tau_phi, p10.tau_phi),
        p01,
        p10,
    })
}

/// One revival sample: time, displacement amplitude and P(0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevivalSample {
    pub t_us: f64,
    pub alpha: f64,
    pub p0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevivalFit {
    /// Fitted Kerr coefficient, MHz.
    pub kerr_mhz: Estimate,
    pub a0: Estimate,
    pub c: Estimate,
    pub ssr: f64,
}

/// P0 = A0 exp(1 + cos(2π(δ + w(α)·k)t)) + C.
pub fn revival_model(t: f64, delta_mhz: f64, shift_mhz: f64, a0: f64, c: f64) -> f64 {
    a0 * (1.0 + (TWO_PI * (delta_mhz + shift_mhz) * t).cos()).exp() + c
}

fn basis(t: f64, f: f64) -> f64 {
    (1.0 + (TWO_PI * f * t).cos()).exp()
}

// Least squares of (A0, C) for a fixed k.
fn linear_amplitudes(data: &[RevivalSample], delta: f64, weight: fn(f64) -> f64, k: f64) -> Option<(f64, f64, f64)> {
    let (mut sxx, mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for s in data {
        let x = basis(s.t_us, delta + weight(s.alpha) * k);
        sxx += x * x;
        sx += x;
        sy += s.p0;
        sxy += x * s.p0;
    }
    let n = data.len() as f64;
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return None;
    }
    let a = (n * sxy - sx * sy) / det;
    let c = (sy - a * sx) / n;
    let ssr = data.iter().map(|s| (a * basis(s.t_us, delta + weight(s.alpha) * k) + c - s.p0).powi(2)).sum();
    Some((a, c, ssr))
}

fn fit_revival(data: &[RevivalSample], delta_mhz: f64, weight: fn(f64) -> f64) -> Result<RevivalFit> {
    if data.len() < 4 {
        return Err(Error::InvalidInput("need ≥ 4 revival samples".into()));
    }
    if data.iter().any(|s| !(s.t_us.is_finite() && s.alpha.is_finite() && s.p0.is_finite())) || !delta_mhz.is_finite() || delta_mhz == 0.0 {
        return Err(Error::InvalidInput("revival data and detuning must be finite, detuning nonzero".into()));
    }
    let t_max = data.iter().map(|s| s.t_us.abs()).fold(0.0, f64::max);
    let w_max = data.iter().map(|s| weight(s.alpha).abs()).fold(0.0, f64::max);
    if !(t_max > 0.0 && w_max > 0.0) {
        return Err(Error::InvalidInput("revival data need t > 0 and α ≠ 0".into()));
    }
    // Scan the shift over ±|δ|/2 finely enough that the phase at t_max moves < 0.05 rad per step.
    let k_range = 0.5 * delta_mhz.abs() / w_max;
    let step = 0.05 / (TWO_PI * t_max * w_max);
    let n = ((2.0 * k_range / step).ceil() as usize).clamp(200, 200_000);
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for i in 0..=n {
        let k = -k_range + 2.0 * k_range * i as f64 / n as f64;
        if let Some((a, c, ssr)) = linear_amplitudes(data, delta_mhz, weight, k) {
            if best.is_none_or(|b| ssr < b.3) {
                best = Some((k, a, c, ssr));
            }
        }
    }
    let (k0, a0, c0, _) = best.ok_or_else(|| Error::FitDiverged("degenerate revival basis".into()))?;
    // Parameterize k in units of the grid step so the Jacobian is well scaled.
    let scale = step;
    let r = levenberg_marquardt(
        |p: &[f64]| {
            data.iter().map(|s| revival_model(s.t_us, delta_mhz, weight(s.alpha) * p[0] * scale, p[1], p[2]) - s.p0).collect()
        },
        &[k0 / scale, a0, c0],
        FitOptions::default(),
    )
    .map_err(|e| Error::FitDiverged(format!("revival fit: {e}")))?;
    let k = r.params[0] * scale;
    if !k.is_finite() || !r.params[1].is_finite() {
        return Err(Error::FitDiverged("non-physical fit result".into()));
    }
    let clean = |s: f64| if s.is_finite() { s } else { 0.0 };
    Ok(RevivalFit {
        kerr_mhz: Estimate::new(k, clean(r.sigma[0]) * scale),
        a0: Estimate::new(r.params[1], clean(r.sigma[1])),
        c: Estimate::new(r.params[2], clean(r.sigma[2])),
        ssr: r.ssr,
    })
}

fn cross_weight(alpha: f64) -> f64 {
    alpha * alpha
}

fn self_weight(alpha: f64) -> f64 {
    0.5 * alpha * alpha
}

/// χ_ab from interferometric revivals with shift |α_d|²χ_ab on top of δ_i.
pub fn fit_cross_kerr_interferometric(data: &[RevivalSample], delta_i_mhz: f64) -> Result<RevivalFit> {
    fit_revival(data, delta_i_mhz, cross_weight)
}

/// K_a from revivals with shift ½K_a|α|² on top of δ.
pub fn fit_self_kerr(data: &[RevivalSample], delta_mhz: f64) -> Result<RevivalFit> {
    fit_revival(data, delta_mhz, self_weight)
}

/// Synthetic revival data for a cross-Kerr (`self_kerr = false`) or self-Kerr experiment.
pub fn synthesize_revivals(times_us: &[f64], alpha: f64, delta_mhz: f64, kerr_mhz: f64, self_kerr: bool, a0: f64, c: f64) -> Vec<RevivalSample> {
    let w = if self_kerr { self_weight(alpha) } else { cross_weight(alpha) };
    times_us
        .iter()
        .map(|&t| RevivalSample { t_us: t, alpha, p0: revival_model(t, delta_mhz, w * kerr_mhz, a0, c) })
        .collect()
}

/// Slope of spectroscopic dip centers vs photon number, i.e. the frequency shift per photon.
pub fn spectroscopic_shift(n_bar: &[f64], centers_mhz: &[f64]) -> Result<Estimate> {
    let ((_, b), (_, sb)) = linear_regression(n_bar, centers_mhz)?;
    Ok(Estimate::new(b, sb))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// Reads `t_us,p01,p10` rows.
pub fn read_bs_csv<R: Read>(r: R) -> Result<Vec<BsSample>> {
    reader(r).deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Reads `t_us,alpha_d,p0` rows.
pub fn read_revival_csv<R: Read>(r: R) -> Result<Vec<RevivalSample>> {
    #[derive(Deserialize)]
    struct Row {
        t_us: f64,
        alpha_d: f64,
        p0: f64,
    }
    reader(r)
        .deserialize::<Row>()
        .map(|row| row.map(|x| RevivalSample { t_us: x.t_us, alpha: x.alpha_d, p0: x.p0 }).map_err(csv_err))
        .collect()
}

/// Reads `phi_e,omega_c_ghz` rows of a coupler-frequency flux sweep.
pub fn read_flux_csv<R: Read>(r: R) -> Result<Vec<(f64, f64)>> {
    #[derive(Deserialize)]
    struct Row {
        phi_e: f64,
        omega_c_ghz: f64,
    }
    reader(r).deserialize::<Row>().map(|row| row.map(|x| (x.phi_e, x.omega_c_ghz)).map_err(csv_err)).collect()
}
