use snail_core::dressed_system::SystemModel;
use snail_core::dynamics::IntegratorOptions;
use snail_core::hilbert::{coherent_state_tol, C64};
use snail_core::protocols::*;
use snail_core::units::wrap_angle;

fn model() -> SystemModel {
    SystemModel::device()
}

#[test]
fn continuous_gate_length() {
    let t = continuous_duration(-1.104, 0.0);
    // √3·π/|χ| with χ in rad/μs.
    let oracle = 3f64.sqrt() * std::f64::consts::PI / (2.0 * std::f64::consts::PI * 1.104);
    assert!((t - oracle).abs() < 1e-12);
    assert!((t - 0.784).abs() < 1e-3);
}

#[test]
fn trotterized_is_longer() {
    let g = 1.104 / (2.0 * 3f64.sqrt());
    assert!(trotterized_duration(g, -1.104) > continuous_duration(-1.104, 0.0));
    // π/(2g) + π/|χ| written out by hand.
    let t = trotterized_duration(1.0, -1.0);
    assert!((t - (0.25 + 0.5)).abs() < 1e-12);
}

#[test]
fn unconditional_swap_rabi_counts_cycles() {
    assert!((unconditional_swap_rabi(2.0, 3).unwrap() - 1.5).abs() < 1e-12);
    assert!(unconditional_swap_rabi(2.0, 0).is_err());
}

#[test]
fn zero_rounds_need_no_correction() {
    let cal = calibrate_delays(&model(), 0, &CalibrationOptions::default()).unwrap();
    assert_eq!(cal, CswapCalibration::default());
}

#[test]
fn ramps_longer_than_gate_are_rejected() {
    assert!(cswap_design(&model(), 5000.0).is_err());
    assert!(cswap_design(&SystemModel { chi_b: 0.0, ..model() }, 24.0).is_err());
}

#[test]
fn calibration_removes_branch_dependence() {
    let opts = CalibrationOptions::default();
    let cal = calibrate_delays(&model(), 1, &opts).unwrap();
    let ang = branch_angles(&model(), 1, cal.pre_delay_ns, cal.post_delay_ns, &opts).unwrap();
    let (r1, r2) = ang.residual();
    assert!(r1.abs() < 1e-3 && r2.abs() < 1e-3, "{r1} {r2}");
    let period = 1e3 / 1.104;
    assert!((0.0..period).contains(&cal.pre_delay_ns));
    assert!((0.0..period).contains(&cal.post_delay_ns));
}

#[test]
fn calibrated_gate_reproduces_truth_table() {
    let opts = CalibrationOptions::default();
    for n in [1usize, 3] {
        let cal = calibrate_delays(&model(), n, &opts).unwrap();
        let f = truth_table_fidelity(&model(), &cal, n, &opts).unwrap();
        assert!(f > 0.999, "N={n}: {f}");
    }
}

#[test]
fn uncalibrated_gate_is_worse() {
    let opts = CalibrationOptions::default();
    let f = truth_table_fidelity(&model(), &CswapCalibration::default(), 1, &opts).unwrap();
    assert!(f < 0.99, "{f}");
}

#[test]
fn geometric_phase_is_half_solid_angle() {
    let (total, dynamical, geometric) = g_branch_phases(&model()).unwrap();
    assert!((wrap_angle(total - dynamical) - geometric).abs() < 1e-12);
    let expected = half_solid_angle_phase(&model()).unwrap();
    assert!(wrap_angle(geometric - expected).abs() < 1e-8, "{geometric} {expected}");
    // One loop on a cone whose axis sits 150° from the starting point.
    let closed = wrap_angle(-std::f64::consts::PI * (1.0 + 3f64.sqrt() / 2.0));
    assert!(wrap_angle(expected - closed).abs() < 1e-8);
}

#[test]
fn g_branch_photon_returns_home() {
    // Single photon in A with the control in |g⟩: the two detuned swaps bring it back.
    let opts = CalibrationOptions::default();
    let cal = calibrate_delays(&model(), 1, &opts).unwrap();
    let seq = build_cswap(&model(), &cal, 1, DEFAULT_RAMP_NS).unwrap();
    let spec = snail_core::hilbert::HilbertSpec::cavities_ancilla(3, 3).unwrap();
    let mut psi = snail_core::hilbert::CVec::zeros(spec.total());
    psi[spec.index(&[1, 0, 0])] = C64::new(1.0, 0.0);
    let out = execute_pure(&seq, &model(), &psi, &spec, false, &IntegratorOptions::adaptive(1e-10)).unwrap();
    assert!((out[spec.index(&[1, 0, 0])].norm_sqr() - 1.0).abs() < 1e-4);
}

#[test]
fn swap_test_closed_system_antisymmetric_pair() {
    // |α,−α⟩ has overlap e^{−4|α|²}, so p_g = (1 + e^{−8})/2.
    let cfg = SwapTestConfig {
        dims: (12, 12),
        include_kerr: false,
        readout_ns: 0.0,
        integrator: IntegratorOptions::adaptive(1e-9),
        ..Default::default()
    };
    let alpha = C64::new(cfg.alpha, 0.0);
    let a = coherent_state_tol(alpha, 12, 1e-5).unwrap();
    let b = coherent_state_tol(-alpha, 12, 1e-5).unwrap();
    let res = swap_test(&model(), &a, &b, 1, &cfg).unwrap();
    let oracle = 0.5 * (1.0 + (-8.0f64).exp());
    assert!((res.p_g - oracle).abs() < 2e-3, "{} vs {oracle}", res.p_g);
    assert!((res.state.trace() - 1.0).norm() < 1e-9);
}

#[test]
fn swap_test_identical_states_always_pass() {
    let cfg = SwapTestConfig {
        dims: (12, 12),
        include_kerr: false,
        readout_ns: 0.0,
        integrator: IntegratorOptions::adaptive(1e-9),
        ..Default::default()
    };
    let a = coherent_state_tol(C64::new(1.0, 0.0), 12, 1e-5).unwrap();
    let res = swap_test(&model(), &a, &a, 1, &cfg).unwrap();
    assert!((res.p_g - 1.0).abs() < 2e-3, "{}", res.p_g);
}

#[test]
fn swap_test_rejects_even_rounds() {
    let a = coherent_state_tol(C64::new(1.0, 0.0), 6, 1e-3).unwrap();
    let cfg = SwapTestConfig { dims: (6, 6), ..Default::default() };
    assert!(swap_test(&model(), &a, &a, 2, &cfg).is_err());
}

#[test]
fn beamsplitter_sweep_oscillates_at_rate() {
    let times: Vec<f64> = (0..=20).map(|k| 0.05 * k as f64).collect();
    let rows = beamsplitter_sweep(
        &SystemModel::device().closed(),
        &[1.0],
        &[0.0],
        &times,
        (2, 2),
        &IntegratorOptions::adaptive(1e-10),
    )
    .unwrap();
    for r in &rows {
        let oracle = (std::f64::consts::TAU * r.t_us).cos().powi(2);
        assert!((r.p01 - oracle).abs() < 1e-6, "{} {}", r.t_us, r.p01);
        assert!((r.p01 + r.p10 - 1.0).abs() < 1e-8);
    }
}

#[test]
fn sequence_duration_adds_segments() {
    let cal = CswapCalibration { pre_delay_ns: 100.0, post_delay_ns: 50.0, ..Default::default() };
    let seq = build_cswap(&model(), &cal, 3, 24.0).unwrap();
    let d = cswap_design(&model(), 24.0).unwrap();
    assert!((seq.total_duration_ns() - (150.0 + 3.0 * d.pulse_ns)).abs() < 1e-9);
}
