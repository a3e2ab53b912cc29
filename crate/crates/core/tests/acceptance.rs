//! One PASS/FAIL line per acceptance criterion. Known failures are reported,
//! not panicked on, so the remaining criteria still run.

use std::time::Instant;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snail_core::circuit_model::*;
use snail_core::dressed_system::*;
use snail_core::dynamics::IntegratorOptions;
use snail_core::error_budget::*;
use snail_core::estimators::*;
use snail_core::hilbert::{coherent_state_tol, kron_vec, CVec, HilbertSpec, QuantumState, C64};
use snail_core::protocols::*;
use snail_core::tomography::*;

type Outcome = snail_core::Result<(bool, String)>;

fn report(n: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} [{verdict}] {title}: {detail} ({:.1} s)", start.elapsed().as_secs_f64());
    pass
}

fn device_spectrum(flux: f64, order: usize) -> snail_core::Result<CouplerSpectrum> {
    Ok(coupler_spectrum(&SnailCircuit::device().at_flux(flux), order)?.1)
}

fn anharmonicity_oracle() -> Outcome {
    let mut worst = (0.0, 0.0, 0.0, 0.0);
    let mut checked = 0;
    for k in 0..20 {
        let f = 0.1 + 0.35 * k as f64 / 19.0;
        let s = device_spectrum(f, 4)?;
        let exact = exact_anharmonicity(&s, 40)?;
        if s.alpha_c.abs() * 1e3 <= 1.0 {
            continue;
        }
        checked += 1;
        let rel = (s.alpha_c - exact).abs() / exact.abs();
        if rel > worst.0 {
            worst = (rel, f, s.alpha_c * 1e3, exact * 1e3);
        }
    }
    Ok((
        worst.0 < 0.1,
        format!(
            "{checked} points with |α_c| > 1 MHz, worst relative error {:.1}% at flux {:.4} (perturbative {:.3} MHz, exact {:.3} MHz)",
            100.0 * worst.0,
            worst.1,
            worst.2,
            worst.3
        ),
    ))
}

fn zero_crossing(f: impl Fn(f64) -> snail_core::Result<f64>, lo: f64, hi: f64) -> snail_core::Result<Option<f64>> {
    let n = 400;
    let mut prev = (lo, f(lo)?);
    for k in 1..=n {
        let x = lo + (hi - lo) * k as f64 / n as f64;
        let y = f(x)?;
        if prev.1.signum() != y.signum() {
            let (mut a, mut b) = (prev.0, x);
            let sa = prev.1.signum();
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if f(m)?.signum() == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        prev = (x, y);
    }
    Ok(None)
}

fn sign_changes() -> Outcome {
    let lc = LinearCoupling::device();
    let g4 = zero_crossing(|f| Ok(device_spectrum(f, 5)?.g4()), 0.3, 0.48)?;
    let chi = zero_crossing(|f| predict_cross_kerr(&device_spectrum(f, 5)?, &lc), 0.3, 0.48)?;
    let window = 0.37..=0.43;
    let inside = |x: Option<f64>| x.is_some_and(|v| window.contains(&v));
    let show = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:.4}"));
    Ok((
        inside(g4) && inside(chi),
        format!("g4 crosses zero at flux {}, χ_ab at {} (window 0.37 to 0.43)", show(g4), show(chi)),
    ))
}

fn truth_table() -> Outcome {
    let model = SystemModel::device();
    let opts = CalibrationOptions::default();
    let cal = calibrate_delays(&model, 1, &opts)?;
    let fid = truth_table_fidelity(&model, &cal, 1, &opts)?;
    let g_khz = cswap_design(&model, opts.ramp_ns)?.g_bs_mhz * 1e3;
    let printed = format!("{g_khz:.0}") == "319";
    Ok((fid > 0.999 && printed, format!("entanglement fidelity {fid:.6}, g_bs = {g_khz:.2} kHz")))
}

fn bell_fidelity_at(tau_ro: f64) -> snail_core::Result<f64> {
    let model = SystemModel::device();
    let cfg = SimulationConfig { tau_ro, ..SimulationConfig::default() };
    let copts = CalibrationOptions { ramp_ns: cfg.ramp_ns, include_kerr: cfg.include_kerr, ..Default::default() };
    let cal = calibrate_delays(&model, 1, &copts)?;
    Ok(simulate_protocol(&model, Protocol::Bell, 1, &cal, &ChannelSelection::all(), &cfg)?.fidelity())
}

fn bell_reproduction() -> Outcome {
    // Printed probabilities (%) and their precision in channel order.
    let printed = [
        (3.5, 0.1),
        (0.90, 0.15),
        (1.17, 0.01),
        (0.59, 0.03),
        (4.7, 0.2),
        (1.2, 0.2),
        (3.15, 0.03),
        (1.20, 0.04),
        (0.620, 0.005),
        (0.34, 0.01),
        (2.28, 0.02),
    ];
    let durations = BudgetDurations::table();
    let channels = build_channels(&Decoherence::device(), &durations, N_BAR)?;
    let rows_ok = channels.iter().zip(printed).all(|(c, (v, tol))| (100.0 * c.probability - v).abs() <= tol);
    let rep = bell_report(&channels, yy_scale(2f64.sqrt()));
    let gate = 100.0 * rep.gate_error_per_round;
    let sim = 100.0 * bell_fidelity_at(durations.tau_ro)?;
    let stated = 100.0 * bell_fidelity_at(BudgetDurations::stated().tau_ro)?;
    let pass = rows_ok && (gate - 4.0).abs() <= 0.1 && (sim - 75.9).abs() <= 3.0;
    Ok((
        pass,
        format!(
            "simulated F = {sim:.2}% at τ_RO = {} μs (F = {stated:.2}% at {} μs), analytic F = {:.2}%, gate error {gate:.2}%/round, table rows {}",
            durations.tau_ro,
            BudgetDurations::stated().tau_ro,
            100.0 * rep.fidelity,
            if rows_ok { "match" } else { "differ" }
        ),
    ))
}

fn repeated_slopes() -> Outcome {
    let model = SystemModel::device();
    let cfg = SimulationConfig::default();
    let rounds = [1, 3, 5, 7, 9];
    let (bell, control) = rayon::join(
        || repeated_cswap(&model, Protocol::Bell, &rounds, &cfg),
        || repeated_cswap(&model, Protocol::Control, &rounds, &cfg),
    );
    let (b, c) = (100.0 * bell?.infidelity_per_round, 100.0 * control?.infidelity_per_round);
    Ok((
        (b - 4.2).abs() <= 1.0 && (c - 3.1).abs() <= 1.0,
        format!("infidelity per round {b:.2}% (target 4.2 ± 1), control {c:.2}% (target 3.1 ± 1)"),
    ))
}

fn tomography_caps() -> Outcome {
    let dim = 24;
    let a = C64::new(2f64.sqrt(), 0.0);
    let coh = |x: C64| coherent_state_tol(x, dim, 1e-12);
    let norm = |v: CVec| {
        let n = v.norm();
        v / C64::new(n, 0.0)
    };
    let pds = PauliDisplacementSet::new(a)?;
    let cat = norm(coh(a)? + coh(-a)? * C64::new(0.0, 1.0));
    let single = QuantumState::from_pure(&cat, &HilbertSpec::new(&[dim], &["a"])?)?;
    let y = pds.coefficients[2][3] * wigner(&single, 0, pds.betas[3])?;
    // Contrast between |+Y⟩ and |−Y⟩ removes the e^{-2|α|²}-order diagonal offset.
    let anti = norm(coh(a)? - coh(-a)? * C64::new(0.0, 1.0));
    let minus = QuantumState::from_pure(&anti, &HilbertSpec::new(&[dim], &["a"])?)?;
    let contrast = 0.5 * (y - pds.coefficients[2][3] * wigner(&minus, 0, pds.betas[3])?);
    let bell = norm(kron_vec(&coh(a)?, &coh(-a)?) + kron_vec(&coh(-a)?, &coh(a)?));
    let pair = QuantumState::from_pure(&bell, &HilbertSpec::new(&[dim, dim], &["a", "b"])?)?;
    let yy = pauli_expectations(&pair, &pds, &TomographyNoise::ideal())?.get(Pauli::Y, Pauli::Y);
    Ok(((y - 0.857).abs() <= 0.005 && (yy - 0.7346).abs() <= 0.005, format!("raw Y = {y:.4} (±Y contrast {contrast:.4}), raw YY = {yy:.4}")))
}

fn estimator_round_trips() -> Outcome {
    let (g, tau, tau_phi) = (1.0, 168.0, 560.0);
    let spec = WindowSpec::standard(g, composite_time(tau, tau_phi));
    let fit = fit_beamsplitter_windows(&synthesize_windows(&spec, g, 0.3, tau, tau_phi), spec.points_per_window)?;
    let rel = [fit.g_bs_mhz.value / g, fit.tau.value / tau, fit.tau_phi.value / tau_phi].map(|r| (r - 1.0).abs());
    let worst_window = rel.iter().cloned().fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_conf: f64 = 0.0;
    for _ in 0..1000 {
        let ea = ConfusionMatrix::new(rng.gen_range(0.7..1.0), rng.gen_range(0.0..0.3))?;
        let eb = ConfusionMatrix::new(rng.gen_range(0.7..1.0), rng.gen_range(0.0..0.3))?;
        let w: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
        let s: f64 = w.iter().sum();
        let p = Matrix2::new(w[0] / s, w[1] / s, w[2] / s, w[3] / s);
        let q = forward_joint(&p, &ea, &eb);
        let back = correct_joint(&JointCounts::new(q, 0)?, &ea, &eb)?;
        worst_conf = worst_conf.max((back.p - p).abs().max());
    }

    let chi = -390e-6;
    let times: Vec<f64> = (0..500).map(|k| 0.2 * k as f64).collect();
    let rv = fit_cross_kerr_interferometric(&synthesize_revivals(&times, 10f64.sqrt(), 0.2, chi, false, 0.08, 0.1), 0.2)?;
    let chi_rel = (rv.kerr_mhz.value / chi - 1.0).abs();
    Ok((
        worst_window < 1e-3 && worst_conf < 1e-10 && chi_rel < 0.03,
        format!(
            "window fit worst relative error {:.2e}, confusion identity {:.1e}, χ_ab = {:.1} Hz",
            worst_window,
            worst_conf,
            rv.kerr_mhz.value * 1e6
        ),
    ))
}

fn figures_of_merit() -> Outcome {
    let (tau, tau_phi, chi_khz) = (168.0, 560.0, -0.39);
    // Pump amplitude giving a predicted rate just above 1 MHz at 0.32 Φ₀.
    let s = device_spectrum(0.32, 17)?;
    let lc = LinearCoupling::device();
    let rate = |xi: f64| -> snail_core::Result<f64> {
        let pump = PumpConfig { xi: Complex64::new(xi, 0.0), omega_p: 0.0, delta: 0.0 };
        Ok(beamsplitter_rate(&s, &lc, &pump, 17)?.norm())
    };
    let mut xi = 0.5;
    while rate(xi)? < 1.05 {
        xi += 0.05;
    }
    let g_pred = rate(xi)?;
    // Simulated exchange trace with the device loss, then the windowed fit.
    let model = SystemModel::device();
    let d = model.decoherence;
    let mut spec = WindowSpec::standard(g_pred, 1.0 / (0.5 * (1.0 / d.t1_a + 1.0 / d.t1_b)));
    spec.centers_us.truncate(6);
    let rows = beamsplitter_sweep(&model, &[g_pred], &[0.0], &spec.times(), (2, 2), &IntegratorOptions::adaptive(1e-10))?;
    let data: Vec<BsSample> = rows.iter().map(|r| BsSample { t_us: r.t_us, p01: r.p01, p10: r.p10 }).collect();
    let g = fit_beamsplitter_windows(&data, spec.points_per_window)?.g_bs_mhz.value;
    let ratio = on_off_ratio(g, chi_khz * 1e-3);
    let per = bs_per_coherence(g, tau, tau_phi);
    Ok((
        g > 1.0 && ratio > 2e3 && per > 1e3,
        format!("|ξ| = {xi:.2}, simulated g_bs = {g:.4} MHz, on-off ratio {ratio:.0}, τ_bs/t_bs = {per:.0}"),
    ))
}

fn main() {
    println!("acceptance criteria");
    let results = [
        report(1, "perturbative vs exact anharmonicity", anharmonicity_oracle),
        report(2, "g4 and χ_ab sign change near 0.4 Φ0", sign_changes),
        report(3, "cSWAP truth table and g_bs", truth_table),
        report(4, "Bell-state reproduction", bell_reproduction),
        report(5, "repeated-cSWAP slope", repeated_slopes),
        report(6, "tomography caps", tomography_caps),
        report(7, "estimator round trips", estimator_round_trips),
        report(8, "beamsplitter figures of merit", figures_of_merit),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria pass", results.len());
}
