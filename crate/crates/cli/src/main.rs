use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

/// Solve, simulate and verify the feedback/impulse LQ game.
#[derive(Debug, Parser)]
#[command(name = "impulse-game", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write threshold and coefficient paths.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Roll the equilibrium forward from each initial state.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate both value functions over the box at time `t`.
    Value {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t: f64,
    },
    /// Check the equilibrium conditions on a grid; exit 3 on failure.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the bound on the number of impulses.
    Bound {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), commands::CliError> {
    match cli.command {
        Command::Solve { config } => commands::cmd_solve(&commands::load(&config)?),
        Command::Simulate { config } => commands::cmd_simulate(&commands::load(&config)?),
        Command::Value { config, t } => commands::cmd_value(&commands::load(&config)?, t),
        Command::Verify { config } => commands::cmd_verify(&commands::load(&config)?),
        Command::Bound { config } => commands::cmd_bound(&commands::load(&config)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
