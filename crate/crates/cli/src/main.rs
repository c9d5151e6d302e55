//! `uavtilt`: scenario evaluation, optimization runs, Pareto sweeps and
//! transfer experiments from a JSON config.
//!
//! Exit codes: 0 success, 2 configuration error (including a checkpoint
//! written for another configuration), 3 runtime failure.

mod checkpoint;
mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use config::{DecisionInput, ExperimentConfig, Mode};
use output::{OutputDir, Provenance, BUILD_ID};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Checkpoint(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Checkpoint(m) => write!(f, "checkpoint error: {m}"),
            Self::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<uavtilt::Error> for CliError {
    fn from(e: uavtilt::Error) -> Self {
        use uavtilt::Error as E;
        match e {
            E::Config(m) => Self::Config(m),
            E::DimensionMismatch { .. } | E::EmptyUavSet => Self::Config(e.to_string()),
            E::Checkpoint(m) => Self::Checkpoint(m),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Checkpoint(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// Evaluate all cells down-tilted to -12° with 10° vertical beamwidth.
    #[value(name = "baseline-3gpp")]
    Baseline3gpp,
}

#[derive(Debug, Parser)]
#[command(name = "uavtilt", version = BUILD_ID, about = "Cellular tilt optimization experiments for ground users and UAV corridors")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optimizer seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Built-in experiment; combined with --config it keeps that scenario.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Where runs without --out or output_dir are written.
    #[arg(long, env = "UAVTILT_OUTPUT_ROOT", default_value = "uavtilt-runs")]
    output_root: PathBuf,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None if cli.preset.is_some() => ExperimentConfig::from_json(r#"{"mode": "evaluate"}"#)?,
        None => return Err(CliError::Config("either --config or --preset is required".into())),
    };
    if let Some(Preset::Baseline3gpp) = cli.preset {
        cfg.mode = Mode::Evaluate;
        cfg.decision = Some(DecisionInput::Named("baseline".into()));
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    // one seed drives every optimizer
    cfg.bo.seed = cfg.seed;
    cfg.turbo.seed = cfg.seed;
    cfg.morbo.trust.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let hash = cfg.hash();
    let dir = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| {
        let mode = serde_json::to_value(cfg.mode)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        cli.output_root.join(format!("{mode}-{hash}"))
    });
    let out = OutputDir::create(dir, Provenance::new(hash, cfg.seed))?;
    out.json("config.json", &cfg)?;
    let summary = commands::run(&cfg, &out)?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
    eprintln!("outputs in {}", out.root.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("uavtilt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
