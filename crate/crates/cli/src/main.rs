//! `vww`: batch runner for eigenbases, wave solves, energy estimates and
//! regularised-net experiments.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::de::DeserializeOwned;

mod commands;
mod config;
mod error;
mod output;
mod selftest;

use error::{CliError, CliResult};
use output::Outputs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Eigs,
    Solve,
    Forced,
    Estimates,
    Veryweak,
}

#[derive(Debug, Parser)]
#[command(name = "vww", version, about = "Spectral wave experiments with singular potentials")]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// JSON configuration for the command.
    #[arg(long, required_unless_present = "selftest")]
    config: Option<PathBuf>,

    /// Directory receiving the reports.
    #[arg(long, required_unless_present = "selftest")]
    out: Option<PathBuf>,

    /// Run the built-in checks for the command instead of a configuration.
    #[arg(long)]
    selftest: bool,

    /// Worker threads; falls back to VWW_THREADS, then to rayon's default.
    #[arg(long)]
    threads: Option<usize>,
}

fn threads(flag: Option<usize>) -> CliResult<Option<usize>> {
    match flag {
        Some(0) => Err(CliError::Config("--threads must be positive".into())),
        Some(n) => Ok(Some(n)),
        None => match std::env::var("VWW_THREADS") {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .map(Some)
                .ok_or_else(|| CliError::Config(format!("VWW_THREADS must be a positive integer, got '{v}'"))),
            Err(_) => Ok(None),
        },
    }
}

fn load<T: DeserializeOwned>(path: &PathBuf) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn dispatch(cmd: Command, path: &PathBuf) -> CliResult<Outputs> {
    match cmd {
        Command::Eigs => commands::eigs(&load(path)?),
        Command::Solve => commands::solve_cmd(&load(path)?, false),
        Command::Forced => commands::solve_cmd(&load(path)?, true),
        Command::Estimates => commands::estimates(&load(path)?),
        Command::Veryweak => commands::veryweak(&load(path)?),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = threads(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    if cli.selftest {
        return selftest::run(cli.command);
    }
    let (Some(config), Some(out)) = (cli.config, cli.out) else {
        return Err(CliError::Config("--config and --out are required".into()));
    };
    let outputs = dispatch(cli.command, &config)?;
    for path in outputs.write_all(&out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vww: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
