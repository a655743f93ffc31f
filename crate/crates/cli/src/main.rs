//! `multiecho`: phantom generation, acquisition simulation, reconstruction,
//! evaluation and export for multi-echo MRI.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::Workspace;
use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "multiecho",
    version,
    about = "Multi-echo MRI reconstruction from partial k-space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the mask, the noise and the engines.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Clone)]
struct WithMethod {
    #[command(flatten)]
    common: Common,
    /// zero_filled, cs_analysis, dl_sparse, dl_rowsparse or tl_rowsparse.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ground-truth phantom stack.
    Phantom(Common),
    /// Write the k-space line mask.
    Mask(Common),
    /// Sample the phantom through the mask and add noise.
    Simulate(Common),
    /// Reconstruct the simulated k-space with one method.
    Reconstruct(WithMethod),
    /// Print the SNR table of every reconstruction in the output directory.
    Evaluate(Common),
    /// Write PGM images of selected echoes and their error maps.
    Export(Common),
    /// Tune a method's parameters with the greedy L-curve.
    Sweep(WithMethod),
}

fn workspace(common: &Common, method: Option<String>) -> Result<Workspace> {
    let overrides = Overrides {
        seed: common.seed,
        sequential: common.sequential,
        method,
    };
    let cfg = RunConfig::load(common.config.as_deref(), &overrides)?.validated()?;
    commands::ensure_dir(&common.out)?;
    Ok(Workspace {
        out: common.out.clone(),
        cfg,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom(c) => commands::phantom(&workspace(&c, None)?),
        Command::Mask(c) => commands::mask(&workspace(&c, None)?),
        Command::Simulate(c) => commands::simulate(&workspace(&c, None)?),
        Command::Reconstruct(c) => commands::reconstruct(&workspace(&c.common, c.method)?),
        Command::Evaluate(c) => commands::evaluate(&workspace(&c, None)?),
        Command::Export(c) => commands::export(&workspace(&c, None)?),
        Command::Sweep(c) => commands::sweep(&workspace(&c.common, c.method)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
