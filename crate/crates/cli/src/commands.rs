use std::fmt::Write as _;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde_json::json;
use snail_core::circuit_model::{coupler_spectrum, exact_anharmonicity, fit_circuit, flux_sweep, CircuitFitMask};
use snail_core::dressed_system::{
    beamsplitter_rate, bs_per_coherence, critical_amplitude, dressed_frequencies, on_off_ratio, predict_cross_kerr,
    predict_self_kerr, Cavity, PumpConfig,
};
use snail_core::dynamics::IntegratorOptions;
use snail_core::error_budget::{
    bell_report, budget_vs_simulation, build_channels, build_control_channels, control_report, format_table,
    repeated_cswap, yy_scale, Protocol,
};
use snail_core::estimators::{
    fit_beamsplitter_windows, fit_cross_kerr_interferometric, fit_self_kerr, read_bs_csv, read_flux_csv,
    read_revival_csv, BsSample, WindowSpec,
};
use snail_core::hilbert::{coherent_state, C64};
use snail_core::protocols::{
    beamsplitter_sweep, calibrate_delays, cswap_design, swap_test_with, truth_table_fidelity, CalibrationOptions,
    ExecOptions, SwapTestConfig,
};
use snail_core::tomography::{
    bell_fidelity, imaginary_plane, joint_wigner_csv, pauli_expectations, wigner_grid_csv, PauliDisplacementSet,
    TomographyNoise, YyConvention,
};

use crate::config::{FitKind, RunConfig, TraceConfig};
use crate::CliError;

/// Named output files in write order.
pub type Outputs = Vec<(String, String)>;

fn num(v: f64) -> String {
    format!("{v}")
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("outputs serialize") + "\n"
}

fn or_nan(r: snail_core::Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

pub fn flux_sweep_cmd(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let fs = &cfg.flux_sweep;
    let fluxes = fs.flux.values();
    let spectra = flux_sweep(&cfg.circuit, &fluxes, fs.max_order).into_iter().collect::<snail_core::Result<Vec<_>>>()?;
    let mut spectrum = String::from("phi_e,omega_c,phi_zpf,g3,g4,g5,alpha_c\n");
    for s in &spectra {
        let g5 = if s.max_order() >= 5 { s.g5() } else { f64::NAN };
        let row = [s.phi_e, s.omega_c, s.phi_zpf, s.g3(), s.g4(), g5, s.alpha_c].map(num);
        writeln!(spectrum, "{}", row.join(",")).unwrap();
    }
    let sys = &cfg.system;
    let rows: Vec<String> = spectra
        .par_iter()
        .map(|s| {
            let exact = if fs.exact_dim > 0 { or_nan(exact_anharmonicity(s, fs.exact_dim)) } else { f64::NAN };
            let (wa, wb) = dressed_frequencies(&cfg.coupling, s.omega_c).unwrap_or((f64::NAN, f64::NAN));
            let chi = or_nan(predict_cross_kerr(s, &cfg.coupling));
            let ka = or_nan(predict_self_kerr(s, &cfg.coupling, Cavity::A, sys.chi_a, sys.alpha_qt_a));
            let kb = or_nan(predict_self_kerr(s, &cfg.coupling, Cavity::B, sys.chi_b, sys.alpha_qt_b));
            [s.phi_e, exact, wa, wb, chi, ka, kb, critical_amplitude(s)].map(num).join(",")
        })
        .collect();
    let mut kerr = String::from("phi_e,alpha_c_exact,omega_a,omega_b,chi_ab_khz,k_a_khz,k_b_khz,xi_crit\n");
    for r in rows {
        kerr.push_str(&r);
        kerr.push('\n');
    }
    Ok(vec![("spectrum.csv".into(), spectrum), ("predictions.csv".into(), kerr)])
}

fn simulate_trace(cfg: &RunConfig, t: &TraceConfig) -> Result<(Vec<BsSample>, usize), CliError> {
    let d = cfg.system.decoherence;
    let kappa_avg = 0.5 * (1.0 / d.t1_a + 1.0 / d.t1_b);
    let mut spec = WindowSpec::standard(t.g_bs_mhz, 1.0 / kappa_avg);
    spec.centers_us.truncate(t.windows);
    let times = spec.times();
    let tol = IntegratorOptions::adaptive(cfg.simulation.tolerance.min(1e-9));
    let rows = beamsplitter_sweep(&cfg.system, &[t.g_bs_mhz], &[0.0], &times, t.dims, &tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sample = |p: f64| -> f64 {
        if t.shots == 0 {
            return p;
        }
        let k = Binomial::new(t.shots, p.clamp(0.0, 1.0)).expect("valid binomial").sample(&mut rng);
        k as f64 / t.shots as f64
    };
    let data = rows.iter().map(|r| BsSample { t_us: r.t_us, p01: sample(r.p01), p10: sample(r.p10) }).collect();
    Ok((data, spec.points_per_window))
}

pub fn bs_sweep_cmd(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let b = &cfg.bs_sweep;
    let mut outputs = Outputs::new();
    let (tau, tau_phi) = match &b.trace {
        None => (b.tau_us, b.tau_phi_us),
        Some(t) => {
            let (data, ppw) = simulate_trace(cfg, t)?;
            let mut csv = String::from("t_us,p01,p10\n");
            for s in &data {
                writeln!(csv, "{},{},{}", num(s.t_us), num(s.p01), num(s.p10)).unwrap();
            }
            let fit = fit_beamsplitter_windows(&data, ppw)?;
            outputs.push(("trace.csv".into(), csv));
            outputs.push(("trace_fit.json".into(), pretty(&fit)));
            (fit.tau.value, fit.tau_phi.value)
        }
    };
    let fluxes = b.flux.values();
    let xis = b.xi.values();
    let points: Vec<(f64, f64)> = fluxes.iter().flat_map(|&f| xis.iter().map(move |&x| (f, x))).collect();
    let spectra = fluxes
        .iter()
        .map(|&f| coupler_spectrum(&cfg.circuit.at_flux(f), b.max_order.max(4)).map(|r| r.1))
        .collect::<snail_core::Result<Vec<_>>>()?;
    let rows: Vec<[f64; 6]> = points
        .par_iter()
        .enumerate()
        .map(|(i, &(f, xi))| {
            let s = &spectra[i / xis.len()];
            let pump = PumpConfig { xi: Complex64::from_polar(xi, b.pump_phase), omega_p: 0.0, delta: 0.0 };
            let g = or_nan(beamsplitter_rate(s, &cfg.coupling, &pump, b.max_order).map(|z| z.norm()));
            let chi = b.chi_ab_khz.unwrap_or_else(|| or_nan(predict_cross_kerr(s, &cfg.coupling)));
            [f, xi, g, chi, on_off_ratio(g, chi * 1e-3), bs_per_coherence(g, tau, tau_phi)]
        })
        .collect();
    let mut csv = String::from("phi_e,xi,g_bs_mhz,chi_ab_khz,on_off_ratio,bs_per_coherence\n");
    for r in &rows {
        writeln!(csv, "{}", r.map(num).join(",")).unwrap();
    }
    // Per flux, the amplitude with the most beamsplitters per coherence time.
    let best: Vec<_> = rows
        .chunks(xis.len())
        .map(|c| {
            let r = c.iter().filter(|r| r[5].is_finite()).max_by(|a, b| a[5].total_cmp(&b[5]));
            match r {
                Some(r) => json!({"phi_e": r[0], "xi": r[1], "g_bs_mhz": r[2], "on_off_ratio": r[4], "bs_per_coherence": r[5]}),
                None => json!({"phi_e": c[0][0], "xi": null}),
            }
        })
        .collect();
    outputs.push(("bs_sweep.csv".into(), csv));
    outputs.push(("bs_summary.json".into(), pretty(&json!({"tau_us": tau, "tau_phi_us": tau_phi, "optimum": best}))));
    Ok(outputs)
}

pub fn cswap_cmd(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let sim = cfg.simulation.to_core();
    let c = &cfg.cswap;
    let model = &cfg.system;
    let copts = CalibrationOptions { ramp_ns: sim.ramp_ns, include_kerr: sim.include_kerr, ..Default::default() };
    let cal = calibrate_delays(model, c.n_rounds, &copts)?;
    let design = cswap_design(model, sim.ramp_ns)?;
    let truth = if c.truth_table {
        let closed = CalibrationOptions { include_kerr: false, ..copts };
        Some(truth_table_fidelity(model, &cal, c.n_rounds, &closed)?)
    } else {
        None
    };
    let alpha = C64::new(sim.alpha, 0.0);
    let a = coherent_state(alpha, sim.dims.0)?;
    let bst = coherent_state(-alpha, sim.dims.1)?;
    let d = model.decoherence;
    let st = SwapTestConfig {
        alpha: sim.alpha,
        dims: sim.dims,
        ramp_ns: sim.ramp_ns,
        readout_ns: sim.tau_ro * 1e3,
        include_kerr: sim.include_kerr,
        decoherence: c.decoherence.then_some(d),
        integrator: sim.integrator,
    };
    let mut exec =
        if c.decoherence { ExecOptions::with_decoherence(&d, sim.include_kerr) } else { ExecOptions::closed(sim.include_kerr) };
    exec.integrator = sim.integrator;
    let res = swap_test_with(model, &a, &bst, c.n_rounds, &cal, &st, &exec)?;
    let noise = if c.decoherence { TomographyNoise::with_readout(&d, sim.tau_ro) } else { TomographyNoise::ideal() };
    let table = pauli_expectations(&res.state, &PauliDisplacementSet::new(alpha)?, &noise)?;
    let mut pauli: serde_json::Value = serde_json::from_str(&table.to_json()).expect("table json");
    pauli["bell_fidelity_raw"] = json!(bell_fidelity(&table, YyConvention::Raw));
    pauli["bell_fidelity_rescaled"] = json!(bell_fidelity(&table, YyConvention::Rescaled));
    pauli["p_g"] = json!(res.p_g);
    let mut outputs = vec![
        (
            "calibration.json".into(),
            pretty(&json!({"calibration": cal, "design": design, "truth_table_fidelity": truth, "cswap_ns": res.cswap_ns})),
        ),
        ("pauli.json".into(), pretty(&pauli)),
    ];
    if c.wigner_points > 0 {
        let n = c.wigner_points;
        let axis: Vec<f64> =
            (0..n).map(|k| if n == 1 { 0.0 } else { -c.wigner_extent + 2.0 * c.wigner_extent * k as f64 / (n - 1) as f64 }).collect();
        outputs.push(("wigner_a.csv".into(), wigner_grid_csv(&res.state, 0, &axis, &axis)?));
        outputs.push(("wigner_b.csv".into(), wigner_grid_csv(&res.state, 1, &axis, &axis)?));
        outputs.push(("joint_wigner.csv".into(), joint_wigner_csv(&res.state, &imaginary_plane(c.wigner_extent, n))?));
    }
    Ok(outputs)
}

pub fn repeat_cswap_cmd(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let r = &cfg.repeat_cswap;
    let report = repeated_cswap(&cfg.system, r.protocol, &r.rounds, &cfg.simulation.to_core())?;
    let mut csv = String::from("n,duration_us,fidelity\n");
    for p in &report.points {
        writeln!(csv, "{},{},{}", p.n, num(p.duration_us), num(p.fidelity)).unwrap();
    }
    Ok(vec![("repeat.csv".into(), csv), ("repeat.json".into(), pretty(&report))])
}

pub fn budget_cmd(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let b = &cfg.budget;
    let d = &cfg.system.decoherence;
    let sim = cfg.simulation.to_core();
    let mut outputs = Outputs::new();
    let (channels, mut json_report, text) = match b.protocol {
        Protocol::Bell => {
            let ch = build_channels(d, &b.durations, b.n_bar)?;
            let rep = bell_report(&ch, yy_scale(sim.alpha));
            let text = format_table(&rep);
            (ch, serde_json::to_value(&rep).expect("report json"), text)
        }
        Protocol::Control => {
            let ch = build_control_channels(d, &b.durations, b.n_bar)?;
            let rep = control_report(&ch);
            let mut text = String::from("channel,probability,control_effect\n");
            for c in &ch {
                let e = c.effect(snail_core::error_budget::Target::Control, 1.0);
                writeln!(text, "{},{},{}", c.name, num(c.probability), num(e)).unwrap();
            }
            writeln!(text, "gate error per round,{}", num(rep.gate_error_per_round)).unwrap();
            writeln!(text, "fidelity,{}", num(rep.fidelity)).unwrap();
            (ch, serde_json::to_value(&rep).expect("report json"), text)
        }
    };
    if b.simulate {
        let sb = budget_vs_simulation(&cfg.system, b.protocol, &channels, &sim, b.joint)?;
        let mut csv = String::from("channel,probability,target,analytic,simulated\n");
        for c in &sb.per_channel {
            for (t, a, s) in &c.effects {
                writeln!(csv, "{},{},{:?},{},{}", c.name, num(c.probability), t, num(*a), num(*s)).unwrap();
            }
        }
        json_report["simulated"] = serde_json::to_value(&sb).expect("budget json");
        outputs.push(("budget_vs_simulation.csv".into(), csv));
    }
    outputs.insert(0, ("budget.txt".into(), text));
    outputs.insert(1, ("budget.json".into(), pretty(&json_report)));
    Ok(outputs)
}

pub fn fit_cmd(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let f = &cfg.fit;
    let file =
        std::fs::File::open(&f.input).map_err(|e| CliError::Config(format!("fit.input: cannot open '{}': {e}", f.input)))?;
    let input = |e: snail_core::Error| CliError::Config(format!("fit.input: {e}"));
    let report = match f.kind {
        FitKind::Beamsplitter => {
            let data = read_bs_csv(file).map_err(input)?;
            serde_json::to_value(fit_beamsplitter_windows(&data, f.points_per_window)?)
        }
        FitKind::CrossKerr => {
            let data = read_revival_csv(file).map_err(input)?;
            serde_json::to_value(fit_cross_kerr_interferometric(&data, f.delta_mhz)?)
        }
        FitKind::SelfKerr => {
            let data = read_revival_csv(file).map_err(input)?;
            serde_json::to_value(fit_self_kerr(&data, f.delta_mhz)?)
        }
        FitKind::Circuit => {
            let data = read_flux_csv(file).map_err(input)?;
            serde_json::to_value(fit_circuit(&data, &cfg.circuit, CircuitFitMask::default())?)
        }
    }
    .expect("fit json");
    Ok(vec![("fit.json".into(), pretty(&json!({"kind": f.kind, "result": report})))])
}
