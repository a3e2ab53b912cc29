use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use snail_core::circuit_model::*;
use snail_core::dressed_system::*;
use snail_core::Error;
use std::f64::consts::PI;

fn spectrum(flux: f64, order: usize) -> CouplerSpectrum {
    coupler_spectrum(&SnailCircuit::device().at_flux(flux), order).unwrap().1
}

fn linear_only(s: &CouplerSpectrum) -> CouplerSpectrum {
    CouplerSpectrum { g: vec![0.0; s.g.len()], alpha_c: 0.0, ..s.clone() }
}

fn pump(xi: f64) -> PumpConfig {
    PumpConfig { xi: Complex64::new(xi, 0.0), omega_p: 3.94, delta: 0.0 }
}

#[test]
fn uncoupled_modes_keep_bare_frequencies() {
    let lc = LinearCoupling { g_a: 0.0, g_b: 0.0, ..LinearCoupling::device() };
    let (wa, wb) = dressed_frequencies(&lc, 5.2).unwrap();
    assert_eq!(wa, lc.omega_a_bare);
    assert_eq!(wb, lc.omega_b_bare);
}

#[test]
fn dispersive_shift_matches_two_level_eigenvalue() {
    let (om, g, wc) = (2.976018, 0.0756, 5.2);
    let shift = (om - dressed_frequency(75.6, om, wc)) * 1e3;
    assert!((shift - 2.57).abs() < 0.005, "{shift}");
    // Lower eigenvalue of [[Ω, g], [g, ω_c]].
    let lower = 0.5 * (om + wc) - (0.25 * (wc - om).powi(2) + g * g).sqrt();
    assert!(((om - lower) * 1e3 - shift).abs() < 0.01);
}

#[test]
fn dispersive_guard_rejects_near_resonance() {
    let lc = LinearCoupling::device();
    assert!(matches!(dressed_frequencies(&lc, 3.1), Err(Error::DispersiveViolation { .. })));
}

fn synthetic_dressed(lc: &LinearCoupling, noise_ghz: f64, seed: u64) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, noise_ghz.max(1e-300)).unwrap();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..21 {
        let wc = 4.4 + 0.05 * k as f64;
        let (wa, wb) = dressed_frequencies(lc, wc).unwrap();
        a.push((wc, wa + if noise_ghz > 0.0 { n.sample(&mut rng) } else { 0.0 }));
        b.push((wc, wb + if noise_ghz > 0.0 { n.sample(&mut rng) } else { 0.0 }));
    }
    (a, b)
}

#[test]
fn linear_coupling_fit_recovers_device_values() {
    let truth = LinearCoupling::device();
    let start = LinearCoupling { g_a: 60.0, g_b: 150.0, omega_a_bare: 2.97, omega_b_bare: 6.92 };
    let (a, b) = synthetic_dressed(&truth, 0.0, 0);
    let (fit, _, _) = fit_linear_coupling(&a, &b, &start).unwrap();
    assert!((fit.g_a - 75.6).abs() < 1e-4);
    assert!((fit.g_b - 134.9).abs() < 1e-4);

    // With 5 kHz frequency noise the stated uncertainties are met.
    let (a, b) = synthetic_dressed(&truth, 5e-6, 7);
    let (fit, fa, fb) = fit_linear_coupling(&a, &b, &start).unwrap();
    assert!((fit.g_a - 75.6).abs() < 0.2 && fa.sigma_g_mhz < 0.2);
    assert!((fit.g_b - 134.9).abs() < 0.1 && fb.sigma_g_mhz < 0.1);
}

#[test]
fn linear_coupler_gives_no_kerr() {
    let s = linear_only(&spectrum(0.32, 5));
    let lc = LinearCoupling::device();
    assert_eq!(predict_cross_kerr(&s, &lc).unwrap(), 0.0);
    assert_eq!(predict_self_kerr(&s, &lc, Cavity::A, 0.0, -181.25).unwrap(), 0.0);
}

#[test]
fn cross_kerr_changes_sign_at_high_flux() {
    let lc = LinearCoupling::device();
    let chi = |f: f64| predict_cross_kerr(&spectrum(f, 5), &lc).unwrap();
    assert!(chi(0.40) < 0.0 && chi(0.46) > 0.0);
    let at = chi(0.32);
    assert!((-0.5..-0.3).contains(&at), "{at}");
}

#[test]
fn cross_kerr_agrees_with_exact_diagonalization() {
    let lc = LinearCoupling::device();
    for &f in &[0.1, 0.2, 0.25, 0.3] {
        let s = spectrum(f, 5);
        let (chi, _, _) = exact_kerrs(&s, &lc, (3, 3, 10)).unwrap();
        let chi_p = predict_cross_kerr(&s, &lc).unwrap();
        assert!((chi_p - chi).abs() < 0.25 * chi.abs(), "flux {f}: {chi_p} vs {chi}");
    }
}

#[test]
fn self_kerr_agrees_with_exact_diagonalization() {
    // Two-photon levels need headroom above them, hence four cavity levels.
    let lc = LinearCoupling::device();
    for &f in &[0.1, 0.2, 0.32] {
        let s = spectrum(f, 5);
        let (_, ka, kb) = exact_kerrs(&s, &lc, (4, 4, 14)).unwrap();
        let ka_p = predict_self_kerr(&s, &lc, Cavity::A, 0.0, -181.25).unwrap();
        let kb_p = predict_self_kerr(&s, &lc, Cavity::B, 0.0, -181.25).unwrap();
        assert!((kb_p - kb).abs() < 0.25 * kb.abs(), "K_b at {f}: {kb_p} vs {kb}");
        // Cavity A is far detuned; its coupler Kerr is tens of Hz.
        assert!((ka_p - ka).abs() < 0.1, "K_a at {f}: {ka_p} vs {ka}");
    }
}

#[test]
fn transmon_self_kerr_contribution() {
    let s = linear_only(&spectrum(0.32, 5));
    let k = predict_self_kerr(&s, &LinearCoupling::device(), Cavity::A, -0.7664, -181.25).unwrap();
    assert!((k - (-0.7664f64).powi(2) / (4.0 * -181.25) * 1e3).abs() < 1e-12);
    assert!((k + 0.81).abs() < 0.005, "{k}");
}

#[test]
fn beamsplitter_leading_order_limit() {
    let s = spectrum(0.35, 17);
    let lc = LinearCoupling::device();
    let xi = 1e-3;
    let full = beamsplitter_rate(&s, &lc, &pump(xi), 17).unwrap();
    let lead = beamsplitter_rate_leading(&s, &lc, xi).unwrap();
    assert!((full.re - lead).abs() < 1e-3 * lead.abs());
    assert!(full.im.abs() < 1e-15);
}

#[test]
fn beamsplitter_rate_bends_below_linear() {
    let s = spectrum(0.35, 17);
    let lc = LinearCoupling::device();
    for &xi in &[1.0, 2.0, 3.0] {
        let full = beamsplitter_rate(&s, &lc, &pump(xi), 17).unwrap().norm();
        let lead = beamsplitter_rate_leading(&s, &lc, xi).unwrap().abs();
        assert!(full < lead, "ξ = {xi}");
    }
}

#[test]
fn beamsplitter_exceeds_one_megahertz() {
    let s = spectrum(0.32, 17);
    let lc = LinearCoupling::device();
    let best = (1..=60)
        .map(|k| beamsplitter_rate(&s, &lc, &pump(0.1 * k as f64), 17).unwrap().norm())
        .fold(0.0, f64::max);
    assert!(best > 1.0, "{best}");
    assert!((t_bs(1.0) - 0.125).abs() < 1e-12);
    assert!(t_bs(best) < 0.125);
}

#[test]
fn series_truncation_is_stable_at_small_amplitude() {
    let s = spectrum(0.32, 17);
    let lc = LinearCoupling::device();
    for &xi in &[0.25, 0.5, 1.0] {
        let short = beamsplitter_rate(&s, &lc, &pump(xi), 5).unwrap().norm();
        let long = beamsplitter_rate(&s, &lc, &pump(xi), 17).unwrap().norm();
        assert!((short - long).abs() < 0.01 * long, "ξ = {xi}");
    }
}

#[test]
fn critical_amplitude_values() {
    let s = spectrum(0.32, 5);
    assert!((critical_amplitude(&s) - 12.9).abs() < 0.1, "{}", critical_amplitude(&s));
    let mut t = s.clone();
    t.phi_zpf = 1.5 * PI;
    assert!((critical_amplitude(&t) - 1.0).abs() < 1e-15);
    let mut h = s.clone();
    h.phi_zpf = 0.5 * s.phi_zpf;
    assert!((critical_amplitude(&h) - 2.0 * critical_amplitude(&s)).abs() < 1e-12);
    let over = beamsplitter_rate(&s, &LinearCoupling::device(), &pump(13.0), 5);
    assert!(matches!(over, Err(Error::AmplitudeAboveCritical { .. })));
}

#[test]
fn inherited_decoherence_design_point() {
    // 100 MHz couplings detuned by 2 GHz: (g/Δ)² = 2.5e-3.
    let lc = LinearCoupling { g_a: 100.0, g_b: 100.0, omega_a_bare: 3.0, omega_b_bare: 7.0 };
    let s = CouplerSpectrum { phi_e: 0.0, omega_c: 5.0, phi_zpf: 0.36, g: vec![0.0; 6], alpha_c: 0.0 };
    let (gc, gphi) = (1.0 / 10.0, 1.0 / 20.0);
    let (a, b) = inherited_decoherence(&lc, &s, gc, gphi, NoiseModel::Pink).unwrap();
    for r in [a, b] {
        assert!((r.kappa * 4000.0 - 1.0).abs() < 0.1, "{}", 1.0 / r.kappa);
        assert!(r.kappa_phi < r.kappa);
    }
    let (w, _) = inherited_decoherence(&lc, &s, gc, gphi, NoiseModel::White).unwrap();
    assert!(a.kappa_phi >= w.kappa_phi);

    let off = LinearCoupling { g_a: 0.0, g_b: 0.0, ..lc };
    let (a0, b0) = inherited_decoherence(&off, &s, gc, gphi, NoiseModel::Pink).unwrap();
    assert_eq!((a0.kappa, a0.kappa_phi, b0.kappa, b0.kappa_phi), (0.0, 0.0, 0.0, 0.0));
}

fn network_xi(z21: Complex64, power: f64) -> f64 {
    xi_from_network(Complex64::new(50.0, 0.0), z21, 50.0, power, 3.94, 5.2, 1e-9, 2.07e-16).unwrap()
}

#[test]
fn network_drive_scaling() {
    let z = Complex64::new(5.0, 2.0);
    assert_eq!(network_xi(z, 0.0), 0.0);
    let x = network_xi(z, 1e-10);
    assert!((network_xi(z, 2e-10) / x - 2f64.sqrt()).abs() < 1e-12);
    assert!(xi_from_network(z, z, -1.0, 1e-10, 3.94, 5.2, 1e-9, 2e-16).is_err());
}

#[test]
fn single_pole_filter_band() {
    // Pole at 4 GHz with Q = 80; the peak is scaled so that |ξ| = 2 at 100 pW.
    let (f0, q, p) = (4.0, 80.0, 1e-10);
    let pole = |f: f64| Complex64::new(1.0, 0.0) / Complex64::new(1.0, 2.0 * q * (f - f0) / f0);
    let xi_at = |f: f64, scale: f64| {
        xi_from_network(Complex64::new(50.0, 0.0), pole(f) * scale, 50.0, p, f, 5.2, 1e-9, 2.07e-16).unwrap()
    };
    let scale = 2.0 / xi_at(f0, 1.0);
    let band = (0..=400).map(|k| 3.9 + 0.0005 * k as f64).filter(|&f| xi_at(f, scale) > 1.0).count() as f64 * 0.5;
    assert!(band >= 40.0, "{band} MHz");
}

#[test]
fn figures_of_merit() {
    assert!(on_off_ratio(1.0, 0.39e-3) > 2e3);
    assert!((composite_time(100.0, 50.0) - 50.0).abs() < 1e-12);
    assert!((bs_per_coherence(1.0, 100.0, 50.0) - 400.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cross_kerr_exchange_symmetry(f in 0.15f64..0.44, ga in 40.0f64..120.0, gb in 40.0f64..160.0) {
        let s = spectrum(f, 5);
        let lc = LinearCoupling { g_a: ga, g_b: gb, ..LinearCoupling::device() };
        let swapped = LinearCoupling { g_a: gb, g_b: ga, omega_a_bare: lc.omega_b_bare, omega_b_bare: lc.omega_a_bare };
        let (x, y) = (predict_cross_kerr(&s, &lc).unwrap(), predict_cross_kerr(&s, &swapped).unwrap());
        prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-9));
    }

    #[test]
    fn beamsplitter_phase_follows_pump(r in 0.01f64..3.0, theta in -PI..PI) {
        let s = spectrum(0.33, 9);
        let xi = Complex64::from_polar(r, theta);
        let g = beamsplitter_rate(&s, &LinearCoupling::device(), &PumpConfig { xi, omega_p: 3.94, delta: 0.0 }, 9).unwrap();
        // g_bs ∝ ξ* with a real prefactor.
        prop_assert!((g * xi).im.abs() < 1e-12 * (g * xi).norm());
    }
}
