//! `pathkernel`: run path-kernel sensitivity estimates, parameter sweeps,
//! finite-difference oracles and Lyapunov estimates from the command line.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Command, Flags, RunConfig};

#[derive(Parser)]
#[command(
    name = "pathkernel",
    version,
    about = "Path-kernel linear response estimates for SDEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One estimate at --gamma.
    Run(Flags),
    /// One estimate per gamma in --grid.
    Sweep(Flags),
    /// Top Lyapunov exponent with its convergence trace.
    Lyapunov(Flags),
    /// Central finite-difference reference derivative.
    Oracle(Flags),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cmd, flags) = match cli.command {
        Cmd::Run(f) => (Command::Run, f),
        Cmd::Sweep(f) => (Command::Sweep, f),
        Cmd::Lyapunov(f) => (Command::Lyapunov, f),
        Cmd::Oracle(f) => (Command::Oracle, f),
    };
    let result = RunConfig::resolve(cmd, &flags).and_then(|cfg| commands::execute(cmd, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
