//! `netgame`: runs the network-game solvers from a TOML experiment file and
//! writes plot-ready CSV, a key-value summary and a JSON-lines event log.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Exit, Failure};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "netgame", version, about = "Equilibria of distributed-learning network games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Alternate best responses and network formation until neither layer moves.
    RunCommutative(Common),
    /// Simultaneous online mirror descent on learning parameters and links.
    RunConcurrent(Common),
    /// Stream one node's data through the recursive update, with link events.
    RunStreaming(Common),
    /// Sweep seeds and compare the network game against hard consensus.
    CompareWelfare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `game.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, common): (fn(&ExperimentConfig, Option<&std::path::Path>) -> Result<Exit, Failure>, Common) = match cli.command {
        Command::RunCommutative(c) => (commands::run_commutative, c),
        Command::RunConcurrent(c) => (commands::run_concurrent, c),
        Command::RunStreaming(c) => (commands::run_streaming, c),
        Command::CompareWelfare(c) => (commands::compare_welfare, c),
    };
    let result = ExperimentConfig::load(&common.config).map_err(Failure::from).and_then(|c| run(&c.with_seed(common.seed), common.out.as_deref()));
    let exit = match result {
        Ok(exit) => {
            match exit {
                Exit::Ok => {}
                Exit::NoConvergence => eprintln!("netgame: solver did not converge; outputs are flagged"),
                Exit::Violation => eprintln!("netgame: invariant violated; see summary.txt"),
                Exit::Config => {}
            }
            exit
        }
        Err(f) => {
            eprintln!("netgame: {}", f.message);
            f.exit
        }
    };
    ExitCode::from(exit as u8)
}
