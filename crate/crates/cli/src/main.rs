use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::Outcome;

#[derive(Parser)]
#[command(name = "wflow", version, about = "Minimizing-movement solver for 1-D nonlinear diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scheme and write trajectory, diagnostics and ledger report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Continue past failed assumptions and record them.
        #[arg(long)]
        force: bool,
    },
    /// Sweep a parameter and fit the convergence rate.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        vary: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// Compare against the finite-difference or closed-form reference.
    Crosscheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Check monotone matching against exact assignment on random atoms.
    Oracle {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, force } => commands::run(&config, force),
        Command::Study { config, vary, values } => commands::study(&config, &vary, &values),
        Command::Crosscheck { config, threshold } => commands::crosscheck(&config, threshold),
        Command::Oracle { k, seed } => commands::oracle(k, seed),
    };
    match &outcome {
        Outcome::Ok => {}
        Outcome::Config(e) => eprintln!("config error: {e:#}"),
        Outcome::Solver(e) => eprintln!("solver error: {e:#}"),
        Outcome::Check(msg) => eprintln!("check failed: {msg}"),
    }
    ExitCode::from(outcome.code())
}
