mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "tdr", version, about = "Time-delay reservoir experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment document (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled experiment: fig2, fig3, fig4, fig5, figE1 or figE2.
    #[arg(long)]
    preset: Option<String>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the Monte Carlo, optimizer and mask-study seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "TDR_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equilibria of the kernel with stability certificates.
    Equilibria(Common),
    /// Stability diagnostics at the operating equilibrium.
    Stability(Common),
    /// Neuron layers of a simulated trajectory (CSV).
    Simulate(Common),
    /// Closed-form memory capacity (JSON).
    Capacity(Common),
    /// Parameter surface scan (CSV).
    Surface(Common),
    /// Capacity maximization, optionally followed by a random-mask study (JSON).
    Optimize(Common),
    /// Monte Carlo NMSE per seed and model (CSV).
    Mc(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => return Err(ConfigError("either --config or --preset is required".into())),
    };
    if let Some(seed) = common.seed {
        cfg.override_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (common, cmd): (&Common, fn(&ExperimentConfig) -> anyhow::Result<String>) = match &cli.command {
        Command::Equilibria(c) => (c, commands::equilibria),
        Command::Stability(c) => (c, commands::stability),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Capacity(c) => (c, commands::capacity),
        Command::Surface(c) => (c, commands::surface),
        Command::Optimize(c) => (c, commands::optimize),
        Command::Mc(c) => (c, commands::mc),
    };
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(ConfigError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let cfg = load(common)?;
    let text = cmd(&cfg)?;
    match &common.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            r => r?,
        },
    }
    Ok(())
}

/// 2 for a bad experiment document, 3 for a numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<tdr_core::Error>() {
        Some(tdr_core::Error::InvalidConfig(_))
        | Some(tdr_core::Error::Dimension(_))
        | Some(tdr_core::Error::MomentLength { .. }) => 2,
        Some(_) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
