mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;
use snail_core::Error;

#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration; exit code 2.
    Config(String),
    /// Numerical failure inside a run; exit code 3.
    Numerical(Error),
    /// Output could not be written; exit code 1.
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(m) | Error::DimensionMismatch(m) => CliError::Config(m),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "snailsim", version, about = "SNAIL-coupled cavity simulations and fits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file, or a manifest from an earlier run.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config leaf, e.g. `--set bs_sweep.xi.points=10`.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Coupler spectrum and Kerr predictions vs flux.
    FluxSweep,
    /// Beamsplitter rate and figures of merit vs flux and pump amplitude.
    BsSweep,
    /// Calibrated cSWAP, SWAP test, Pauli table and Wigner grids.
    Cswap,
    /// Fidelity vs number of cSWAP rounds.
    RepeatCswap,
    /// Error budget, optionally against master-equation runs.
    Budget,
    /// Estimator fits on imported CSV data.
    Fit,
    /// Print the resolved config.
    ShowConfig,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::FluxSweep => "flux-sweep",
            Command::BsSweep => "bs-sweep",
            Command::Cswap => "cswap",
            Command::RepeatCswap => "repeat-cswap",
            Command::Budget => "budget",
            Command::Fit => "fit",
            Command::ShowConfig => "show-config",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let text = match &cli.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut cfg = config::resolve(text.as_deref(), &cli.overrides)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }
    let name = cli.command.name();
    config::validate(&cfg, name)?;
    let start = Instant::now();
    let outputs = match cli.command {
        Command::FluxSweep => commands::flux_sweep_cmd(&cfg)?,
        Command::BsSweep => commands::bs_sweep_cmd(&cfg)?,
        Command::Cswap => commands::cswap_cmd(&cfg)?,
        Command::RepeatCswap => commands::repeat_cswap_cmd(&cfg)?,
        Command::Budget => commands::budget_cmd(&cfg)?,
        Command::Fit => commands::fit_cmd(&cfg)?,
        Command::ShowConfig => {
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
            return Ok(());
        }
    };
    let dir = PathBuf::from(&cfg.output_dir);
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(&dir).map_err(io)?;
    for (file, contents) in &outputs {
        std::fs::write(dir.join(file), contents).map_err(io)?;
    }
    let manifest = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "outputs": outputs.iter().map(|o| &o.0).collect::<Vec<_>>(),
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(dir.join("manifest.json"), text).map_err(io)?;
    for (file, _) in &outputs {
        println!("{}", dir.join(file).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("snailsim: {e}");
            ExitCode::from(e.code())
        }
    }
}
