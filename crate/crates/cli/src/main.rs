//! `nlsnet`: run forward solves, inversions, refinement studies, loss
//! landscapes and verification gates on the benchmark problems.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use commands::GateFailure;
use config::ConfigError;
use output::OutDir;

#[derive(Parser)]
#[command(name = "nlsnet", version, about = "Split-step NLS solver and potential identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the exact initial state and compare with the exact final state.
    Forward(Common),
    /// Recover the potential (or the coupling constants) from the exact data.
    Invert(Common),
    /// Refine M or N and report the observed order.
    Converge(Common),
    /// Scan the coupled loss over a grid of coupling constants.
    Landscape(Common),
    /// Run the residual, forward, mass and gradient gates.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of gates to run.
        #[arg(long, value_delimiter = ',')]
        gates: Option<Vec<String>>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// example1, example2 or example3.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    if e.downcast_ref::<GateFailure>().is_some() {
        return 5;
    }
    match e.downcast_ref::<nlsnet::Error>() {
        Some(nlsnet::Error::Divergence { .. }) => 4,
        Some(
            nlsnet::Error::ZeroReference
            | nlsnet::Error::SingularKernel
            | nlsnet::Error::NonfiniteField
            | nlsnet::Error::NonfiniteGradient,
        ) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn init_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var("NLS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("NLS_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError(e.to_string()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let (common, gates, name) = match cli.command {
        Command::Forward(c) => (c, None, "forward"),
        Command::Invert(c) => (c, None, "invert"),
        Command::Converge(c) => (c, None, "converge"),
        Command::Landscape(c) => (c, None, "landscape"),
        Command::Verify { common, gates } => (common, gates, "verify"),
    };
    let mut flags = Vec::new();
    if let Some(s) = common.scenario {
        flags.push(("scenario", Value::from(s)));
    }
    if let Some(o) = &common.out {
        flags.push(("out", Value::from(o.to_string_lossy().into_owned())));
    }
    if let Some(g) = gates {
        flags.push(("gates", Value::from(g)));
    }
    let cfg = config::load(common.config.as_deref(), &common.sets, flags)?;
    let out = OutDir::create(&PathBuf::from(cfg.out.as_deref().unwrap_or("out")))?;
    match name {
        "forward" => commands::forward(&cfg, &out),
        "invert" => commands::invert(&cfg, &out),
        "converge" => commands::converge(&cfg, &out),
        "landscape" => commands::landscape(&cfg, &out),
        _ => commands::verify(&cfg, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
