//! `ncstream`: analytic curves, single simulation runs and parameter sweeps.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
//! Progress goes to stderr; stdout carries machine-readable summaries only.

mod model;
mod simulate;
mod sweep;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "ncstream",
    version,
    about = "Network-coded P2P streaming under pollution attack"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the analytic pollution model and write its curves.
    Model(model::ModelArgs),
    /// Run one scenario and write its metrics.
    Simulate(simulate::SimulateArgs),
    /// Run a scenario over a grid of one parameter and several seeds.
    Sweep(sweep::SweepArgs),
}

/// Failure classes, mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

pub fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

pub fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

#[derive(Debug, Clone)]
pub struct Override {
    pub name: String,
    pub value: String,
}

/// Parses `name=value` for `--set`.
pub fn parse_override(s: &str) -> Result<Override, String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    Ok(Override {
        name: name.trim().to_string(),
        value: value.trim().to_string(),
    })
}

pub fn out_dir(path: &PathBuf) -> Result<(), Failure> {
    std::fs::create_dir_all(path)
        .map_err(|e| runtime(anyhow::anyhow!("cannot create {}: {e}", path.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Model(a) => model::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Sweep(a) => sweep::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Runtime(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
