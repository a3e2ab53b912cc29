use proptest::prelude::*;
use snail_core::dressed_system::{Decoherence, SystemModel};
use snail_core::dynamics::IntegratorOptions;
use snail_core::error_budget::*;

fn device() -> Decoherence {
    Decoherence::device()
}

fn bell() -> Vec<ErrorChannel> {
    build_channels(&device(), &BudgetDurations::table(), N_BAR).unwrap()
}

#[test]
fn infinite_coherence_means_no_errors() {
    let ch = build_channels(&Decoherence::ideal(), &BudgetDurations::stated(), N_BAR).unwrap();
    assert!(ch.iter().all(|c| c.probability == 0.0));
    let r = bell_report(&ch, yy_scale(2f64.sqrt()));
    assert_eq!(r.gate_error_per_round, 0.0);
    assert!((r.estimated.xx - 1.0).abs() < 1e-15);
}

#[test]
fn table_probabilities_within_printed_uncertainty() {
    // (printed %, printed ±) in channel order.
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
    for (c, (v, tol)) in bell().iter().zip(printed) {
        assert!((100.0 * c.probability - v).abs() <= tol, "{}: {:.4}% vs {v}%", c.name, 100.0 * c.probability);
    }
}

#[test]
fn stated_durations_give_round_number_probabilities() {
    let ch = build_channels(&device(), &BudgetDurations::stated(), N_BAR).unwrap();
    // n̄·τ(1/T1a + 1/T1b) written out.
    let oracle = 2.0 * 1.3 * (1.0 / 482.0 + 1.0 / 91.0);
    assert!((ch[0].probability - oracle).abs() < 1e-15);
    assert!((100.0 * ch[0].probability - 3.4).abs() < 0.01);
    assert!((ch[6].probability - 2.1 / 57.1).abs() < 1e-15);
}

#[test]
fn combine_trivial_cases() {
    assert_eq!(combine(&[]), 1.0);
    assert_eq!(combine(&[(0.0, -1.0), (0.0, 0.0)]), 1.0);
    assert!((combine(&[(0.03, -1.0)]) - 0.94).abs() < 1e-15);
    assert!((combine(&[(0.03, 0.0)]) - 0.97).abs() < 1e-15);
}

#[test]
fn bell_report_matches_bold_rows() {
    let r = bell_report(&bell(), yy_scale(2f64.sqrt()));
    assert!((yy_scale(2f64.sqrt()) - 0.7346).abs() < 1e-4);
    assert!((100.0 * r.gate_error_per_round - 4.0).abs() <= 0.1, "{}", r.gate_error_per_round);
    assert!((100.0 * r.fidelity - 75.9).abs() <= 0.2, "{}", r.fidelity);
    let g = r.gate_error;
    assert!((100.0 * g.xx - 5.7).abs() <= 0.1);
    assert!((100.0 * g.yy - 4.2).abs() <= 0.1);
    assert!((100.0 * g.ii - 2.9).abs() <= 0.3);
    assert!((100.0 * g.zz - 2.9).abs() <= 0.3);
    let e = r.estimated;
    assert!((100.0 * e.xx - 74.2).abs() <= 0.4);
    assert!((100.0 * e.yy - 56.5).abs() <= 0.3);
    assert!((100.0 * e.ii - 86.5).abs() <= 0.6);
}

#[test]
fn per_channel_effects_follow_impacts() {
    let ch = bell();
    let ys = yy_scale(2f64.sqrt());
    // Ancilla dephasing during the gate flips XX: effect 2p.
    assert!((ch[3].effect(Target::XX, ys) - 2.0 * ch[3].probability).abs() < 1e-15);
    assert_eq!(ch[3].effect(Target::II, ys), 0.0);
    // Oscillator decay during the gate: effect p on XX, scaled p on YY.
    assert!((ch[0].effect(Target::YY, ys) - ys * ch[0].probability).abs() < 1e-15);
    assert!((100.0 * ch[4].effect(Target::XX, ys) - 9.4).abs() < 0.3);
}

#[test]
fn control_report_matches_table() {
    let ch = build_control_channels(&device(), &BudgetDurations::table(), N_BAR).unwrap();
    let r = control_report(&ch);
    assert!((100.0 * r.gate_error_per_round - 3.0).abs() <= 0.3, "{}", r.gate_error_per_round);
    assert!((100.0 * r.fidelity - 89.1).abs() <= 0.7, "{}", r.fidelity);
}

#[test]
fn uncertainties_match_printed_precision() {
    let s = probability_sigmas(&device(), &Decoherence::device_sigma(), &BudgetDurations::table(), N_BAR).unwrap();
    let round = |x: f64, digits: i32| (x * 10f64.powi(digits)).round() / 10f64.powi(digits);
    assert_eq!(round(100.0 * s[0], 1), 0.1);
    assert_eq!(round(100.0 * s[2], 2), 0.01);
    assert_eq!(round(100.0 * s[6], 2), 0.03);
    assert_eq!(round(100.0 * s[8], 3), 0.004);
    assert_eq!(round(100.0 * s[10], 2), 0.02);
}

#[test]
fn uncertainty_of_linear_function_is_exact() {
    let sigma = Decoherence {
        t1_a: 2.0,
        tphi_a: 0.0,
        t1_b: 0.0,
        tphi_b: 0.0,
        t1_qa: 0.0,
        tphi_qa: 0.0,
        t1_qb: 0.0,
        tphi_qb: 0.0,
    };
    let s = propagate_uncertainty(&device(), &sigma, |d| Ok(3.0 * d.t1_a)).unwrap();
    assert!((s - 6.0).abs() < 1e-9);
}

#[test]
fn invalid_channels_rejected() {
    let d = Decoherence { t1_b: 0.5, ..device() };
    assert!(build_channels(&d, &BudgetDurations::stated(), N_BAR).is_err());
    let bad = BudgetDurations { tau_ro: -1.0, ..BudgetDurations::stated() };
    assert!(build_channels(&device(), &bad, N_BAR).is_err());
}

#[test]
fn slope_fit_recovers_exponential() {
    let rate = 0.03;
    let pts: Vec<RepeatPoint> = [1.2, 3.1, 5.0, 7.3, 9.0]
        .iter()
        .enumerate()
        .map(|(k, &t)| RepeatPoint { n: 2 * k + 1, duration_us: t, fidelity: 0.8 * (-rate * t).exp() })
        .collect();
    let r = slope_per_round(&pts, 1.2).unwrap();
    assert!((r.rate_per_us - rate).abs() < 1e-12);
    assert!((r.infidelity_per_round - rate * 1.2).abs() < 1e-12);
    assert!(slope_per_round(&pts[..1], 1.2).is_err());
}

#[test]
fn report_renders_and_serializes() {
    let r = bell_report(&bell(), yy_scale(2f64.sqrt()));
    let text = format_table(&r);
    assert!(text.contains("cSWAP RO: ancilla decay"));
    assert_eq!(text.lines().count(), 1 + 11 + 4);
    let json = serde_json::to_string(&r).unwrap();
    let back: BudgetReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
}

#[test]
fn simulated_channels_track_analytic_effects() {
    // Reduced accuracy and truncation keep this fast; the acceptance run uses full settings.
    let model = SystemModel::device();
    let cfg = SimulationConfig { dims: (15, 15), integrator: IntegratorOptions::adaptive(1e-6), ..Default::default() };
    let all = build_control_channels(&model.decoherence, &BudgetDurations::table(), N_BAR).unwrap();
    let picked: Vec<ErrorChannel> = all
        .into_iter()
        .filter(|c| c.segment == Segment::ParityReadout || (c.segment == Segment::Cswap && c.mechanism == Mechanism::AncillaDecay))
        .collect();
    let sim = budget_vs_simulation(&model, Protocol::Control, &picked, &cfg, false).unwrap();
    // Self-Kerr during gate and readout already costs a few percent.
    assert!(sim.baseline.control.unwrap() > 0.95, "{:?}", sim.baseline);
    for c in &sim.per_channel {
        let (_, analytic, simulated) = c.effects[0];
        // The control spends half the gate in |e⟩, so the budget overcounts decay by up to 2×.
        let ratio = simulated / analytic;
        assert!((0.3..1.5).contains(&ratio), "{}: {analytic} vs {simulated}", c.name);
    }
}

proptest! {
    #[test]
    fn combine_is_permutation_invariant(ps in prop::collection::vec((0.0f64..0.1, prop::bool::ANY), 1..8), seed in 0usize..100) {
        let pq: Vec<(f64, f64)> = ps.iter().map(|(p, f)| (*p, if *f { -1.0 } else { 0.0 })).collect();
        let mut shuffled = pq.clone();
        shuffled.rotate_left(seed % pq.len());
        shuffled.reverse();
        prop_assert!((combine(&pq) - combine(&shuffled)).abs() < 1e-14);
    }

    #[test]
    fn combine_without_flips_is_product(ps in prop::collection::vec(0.0f64..0.2, 0..8)) {
        let pq: Vec<(f64, f64)> = ps.iter().map(|p| (*p, 0.0)).collect();
        let prod: f64 = ps.iter().map(|p| 1.0 - p).product();
        prop_assert!((combine(&pq) - prod).abs() < 1e-14);
    }

    #[test]
    fn combine_first_order(ps in prop::collection::vec((0.0f64..0.01, prop::bool::ANY), 1..6)) {
        let pq: Vec<(f64, f64)> = ps.iter().map(|(p, f)| (*p, if *f { -1.0 } else { 0.0 })).collect();
        let first = 1.0 - pq.iter().map(|(p, _)| p).sum::<f64>() + pq.iter().map(|(p, q)| p * q).sum::<f64>();
        let sum: f64 = pq.iter().map(|(p, _)| p).sum();
        prop_assert!((combine(&pq) - first).abs() <= 2.0 * sum * sum + 1e-15);
    }
}
