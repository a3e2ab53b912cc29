use serde::{Deserialize, Serialize};
use serde_json::Value;
use snail_core::circuit_model::SnailCircuit;
use snail_core::dressed_system::{LinearCoupling, SystemModel};
use snail_core::dynamics::IntegratorOptions;
use snail_core::error_budget::{BudgetDurations, Protocol, SimulationConfig, N_BAR};
use snail_core::protocols::DEFAULT_RAMP_NS;

use crate::CliError;

/// Evenly spaced grid including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => vec![],
            1 => vec![self.start],
            n => (0..n).map(|k| self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64).collect(),
        }
    }

    fn check(&self, field: &str) -> Result<(), CliError> {
        if self.points == 0 {
            return Err(CliError::Config(format!("{field}.points: empty sweep grid")));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(CliError::Config(format!("{field}: grid bounds must be finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluxSweepConfig {
    /// External flux in units of Φ₀.
    pub flux: Grid,
    pub max_order: usize,
    /// Fock dimension of the exact anharmonicity check; 0 skips it.
    pub exact_dim: usize,
}

impl Default for FluxSweepConfig {
    fn default() -> Self {
        Self { flux: Grid::new(0.1, 0.45, 36), max_order: 5, exact_dim: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceConfig {
    /// Beamsplitter rate of the simulated exchange trace, MHz.
    pub g_bs_mhz: f64,
    pub dims: (usize, usize),
    /// Binomial shots per point; 0 keeps exact populations.
    pub shots: u64,
    /// Number of coarse window centers.
    pub windows: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { g_bs_mhz: 1.0, dims: (2, 2), shots: 0, windows: 41 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BsSweepConfig {
    pub flux: Grid,
    /// Pump amplitude |ξ|.
    pub xi: Grid,
    pub pump_phase: f64,
    pub max_order: usize,
    /// Measured cross-Kerr in kHz; the predicted value is used when absent.
    pub chi_ab_khz: Option<f64>,
    /// Pumped decay and dephasing times, μs.
    pub tau_us: f64,
    pub tau_phi_us: f64,
    /// When set, τ and τ_φ come from a simulated and fitted exchange trace.
    pub trace: Option<TraceConfig>,
}

impl Default for BsSweepConfig {
    fn default() -> Self {
        Self {
            flux: Grid::new(0.32, 0.32, 1),
            xi: Grid::new(0.2, 6.0, 30),
            pump_phase: 0.0,
            max_order: 17,
            chi_ab_khz: None,
            tau_us: 168.0,
            tau_phi_us: 560.0,
            trace: None,
        }
    }
}

/// Master-equation settings shared by the SWAP-test commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSettings {
    pub alpha: f64,
    pub dims: (usize, usize),
    pub ramp_ns: f64,
    pub include_kerr: bool,
    /// Control and tomography readout window, μs.
    pub tau_ro_us: f64,
    pub tolerance: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        let d = SimulationConfig::default();
        Self {
            alpha: d.alpha,
            dims: d.dims,
            ramp_ns: DEFAULT_RAMP_NS,
            include_kerr: d.include_kerr,
            tau_ro_us: d.tau_ro,
            tolerance: 1e-8,
        }
    }
}

impl SimulationSettings {
    pub fn to_core(&self) -> SimulationConfig {
        SimulationConfig {
            alpha: self.alpha,
            dims: self.dims,
            ramp_ns: self.ramp_ns,
            include_kerr: self.include_kerr,
            tau_ro: self.tau_ro_us,
            integrator: IntegratorOptions::adaptive(self.tolerance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CswapConfig {
    pub n_rounds: usize,
    /// Lindblad decoherence during the SWAP test.
    pub decoherence: bool,
    pub truth_table: bool,
    /// Points per axis of the single-mode Wigner grids; 0 skips them.
    pub wigner_points: usize,
    pub wigner_extent: f64,
}

impl Default for CswapConfig {
    fn default() -> Self {
        Self { n_rounds: 1, decoherence: true, truth_table: true, wigner_points: 41, wigner_extent: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepeatConfig {
    pub rounds: Vec<usize>,
    pub protocol: Protocol,
}

impl Default for RepeatConfig {
    fn default() -> Self {
        Self { rounds: vec![1, 3, 5, 7, 9], protocol: Protocol::Bell }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetConfig {
    pub durations: BudgetDurations,
    pub n_bar: f64,
    pub protocol: Protocol,
    /// Compare each channel with a master-equation run.
    pub simulate: bool,
    /// Also run all channels together.
    pub joint: bool,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { durations: BudgetDurations::table(), n_bar: N_BAR, protocol: Protocol::Bell, simulate: false, joint: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// `t_us,p01,p10` windowed exchange trace.
    Beamsplitter,
    /// `t_us,alpha_d,p0` revivals, cross-Kerr weighting.
    CrossKerr,
    /// `t_us,alpha_d,p0` revivals, self-Kerr weighting.
    SelfKerr,
    /// `phi_e,omega_c_ghz` coupler spectroscopy.
    Circuit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub kind: FitKind,
    pub input: String,
    pub points_per_window: usize,
    /// Interferometer detuning, MHz.
    pub delta_mhz: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { kind: FitKind::Beamsplitter, input: String::new(), points_per_window: 21, delta_mhz: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: String,
    pub circuit: SnailCircuit,
    pub coupling: LinearCoupling,
    pub system: SystemModel,
    pub simulation: SimulationSettings,
    pub flux_sweep: FluxSweepConfig,
    pub bs_sweep: BsSweepConfig,
    pub cswap: CswapConfig,
    pub repeat_cswap: RepeatConfig,
    pub budget: BudgetConfig,
    pub fit: FitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: "out".into(),
            circuit: SnailCircuit::device().at_flux(0.32),
            coupling: LinearCoupling::device(),
            system: SystemModel::device(),
            simulation: SimulationSettings::default(),
            flux_sweep: FluxSweepConfig::default(),
            bs_sweep: BsSweepConfig::default(),
            cswap: CswapConfig::default(),
            repeat_cswap: RepeatConfig::default(),
            budget: BudgetConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

fn defaults_value() -> Value {
    serde_json::to_value(RunConfig::default()).expect("defaults serialize")
}

// Reports keys absent from the defaults. Option fields default to null, so
// anything below a null default is accepted.
fn unknown_keys(given: &Value, known: &Value, path: &str, out: &mut Vec<String>) {
    if let (Value::Object(g), Value::Object(k)) = (given, known) {
        for (key, v) in g {
            let p = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
            match k.get(key) {
                None => out.push(p),
                Some(kv) => unknown_keys(v, kv, &p, out),
            }
        }
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies `a.b.c=value`; the value is parsed as JSON and falls back to a string.
fn set_path(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not of the form path=value")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    let defaults = defaults_value();
    let mut known = Some(&defaults);
    // Below a null default (an unset optional block) any key is accepted.
    let mut open = false;
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        if !open {
            known = known.and_then(|k| k.get(key));
            match known {
                None => return Err(CliError::Config(format!("{path}: unknown field"))),
                Some(Value::Null) => open = true,
                Some(_) => {}
            }
        }
        let obj = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().expect("just created")
            }
            _ => return Err(CliError::Config(format!("{path}: '{}' is not an object", keys[..i].join(".")))),
        };
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one key")
}

/// Defaults, then the file (or the config echoed in a manifest), then overrides.
pub fn resolve(file: Option<&str>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut value = defaults_value();
    if let Some(text) = file {
        let mut given: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        if let (Some(cfg), Some(_)) = (given.get("config"), given.get("command")) {
            given = cfg.clone();
        }
        if !given.is_object() {
            return Err(CliError::Config("config: top level must be an object".into()));
        }
        let mut unknown = Vec::new();
        unknown_keys(&given, &value, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(CliError::Config(format!("unknown field(s): {}", unknown.join(", "))));
        }
        merge(&mut value, given);
    }
    for o in overrides {
        set_path(&mut value, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Config(format!("config: {e}")))?;
    Ok(cfg)
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field}: must be positive, got {v}")))
    }
}

fn dims(field: &str, d: (usize, usize)) -> Result<(), CliError> {
    if d.0 < 2 || d.1 < 2 {
        return Err(CliError::Config(format!("{field}: each dimension must be at least 2")));
    }
    Ok(())
}

fn core(field: &str, r: snail_core::Result<()>) -> Result<(), CliError> {
    r.map_err(|e| CliError::Config(format!("{field}: {e}")))
}

/// Checks the blocks a command uses before it starts.
pub fn validate(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    core("circuit", cfg.circuit.validate())?;
    core("system", cfg.system.validate())?;
    let sim = &cfg.simulation;
    match command {
        "flux-sweep" => {
            let f = &cfg.flux_sweep;
            f.flux.check("flux_sweep.flux")?;
            if !(4..=17).contains(&f.max_order) {
                return Err(CliError::Config("flux_sweep.max_order: must be in 4..=17".into()));
            }
        }
        "bs-sweep" => {
            let b = &cfg.bs_sweep;
            b.flux.check("bs_sweep.flux")?;
            b.xi.check("bs_sweep.xi")?;
            if b.xi.values().iter().any(|x| *x < 0.0) {
                return Err(CliError::Config("bs_sweep.xi: amplitudes must be non-negative".into()));
            }
            if !(3..=17).contains(&b.max_order) {
                return Err(CliError::Config("bs_sweep.max_order: must be in 3..=17".into()));
            }
            positive("bs_sweep.tau_us", b.tau_us)?;
            positive("bs_sweep.tau_phi_us", b.tau_phi_us)?;
            if let Some(t) = &b.trace {
                positive("bs_sweep.trace.g_bs_mhz", t.g_bs_mhz)?;
                dims("bs_sweep.trace.dims", t.dims)?;
                if t.windows < 3 {
                    return Err(CliError::Config("bs_sweep.trace.windows: need at least 3".into()));
                }
            }
        }
        "cswap" | "repeat-cswap" | "budget" => {
            positive("simulation.alpha", sim.alpha)?;
            positive("simulation.tolerance", sim.tolerance)?;
            dims("simulation.dims", sim.dims)?;
            if !(sim.ramp_ns >= 0.0 && sim.tau_ro_us >= 0.0) {
                return Err(CliError::Config("simulation: ramp_ns and tau_ro_us must be non-negative".into()));
            }
            if command == "cswap" && cfg.cswap.n_rounds.is_multiple_of(2) {
                return Err(CliError::Config("cswap.n_rounds: must be odd".into()));
            }
            if command == "repeat-cswap" {
                let r = &cfg.repeat_cswap.rounds;
                if r.is_empty() {
                    return Err(CliError::Config("repeat_cswap.rounds: empty sweep grid".into()));
                }
                if r.iter().any(|n| n % 2 == 0) {
                    return Err(CliError::Config("repeat_cswap.rounds: round counts must be odd".into()));
                }
            }
            if command == "budget" {
                core("budget.durations", cfg.budget.durations.validate())?;
                positive("budget.n_bar", cfg.budget.n_bar)?;
            }
        }
        "fit"
            if cfg.fit.input.is_empty() => {
                return Err(CliError::Config("fit.input: path required".into()));
            }
        _ => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = resolve(None, &["bs_sweep.xi.points=5".into(), "simulation.dims=[4,5]".into()]).unwrap();
        assert_eq!(cfg.bs_sweep.xi.points, 5);
        assert_eq!(cfg.simulation.dims, (4, 5));
    }

    #[test]
    fn optional_blocks_can_be_set_by_path() {
        let cfg = resolve(None, &["bs_sweep.trace.shots=100".into(), "bs_sweep.chi_ab_khz=-0.39".into()]).unwrap();
        assert_eq!(cfg.bs_sweep.trace.unwrap().shots, 100);
        assert_eq!(cfg.bs_sweep.chi_ab_khz, Some(-0.39));
    }

    #[test]
    fn unknown_fields_are_named() {
        match resolve(None, &["flux_sweep.fluxx=1".into()]) {
            Err(CliError::Config(m)) => assert!(m.contains("flux_sweep.fluxx")),
            other => panic!("{other:?}"),
        }
        match resolve(Some(r#"{"cswap": {"rounds": 3}}"#), &[]) {
            Err(CliError::Config(m)) => assert!(m.contains("cswap.rounds")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_config_is_accepted() {
        let cfg = RunConfig { seed: 9, ..RunConfig::default() };
        let manifest = serde_json::json!({"command": "budget", "config": cfg});
        assert_eq!(resolve(Some(&manifest.to_string()), &[]).unwrap(), cfg);
    }

    #[test]
    fn grid_values() {
        assert!(Grid::new(0.0, 1.0, 0).values().is_empty());
        assert_eq!(Grid::new(0.3, 0.5, 1).values(), vec![0.3]);
        assert_eq!(Grid::new(0.0, 1.0, 3).values(), vec![0.0, 0.5, 1.0]);
    }
}
