use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dyngame_cli::{execute, Command, Options, EXIT_ERROR};

#[derive(Parser)]
#[command(
    name = "dyngame",
    version,
    about = "Stability experiments for best-reply dynamics under uncertain expectations"
)]
struct Cli {
    /// Experiment config (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for reports and CSV files
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Overrides sim.seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Evaluate the small-gain conditions; exit 2 when none pass
    Check,
    /// Solve for the equilibrium
    Nash,
    /// Simulate, monitor and judge convergence
    Simulate,
    /// Run a parameter grid into one CSV
    Sweep,
    /// Locate fixed points of the best-reply map from a seed grid
    FixedPoints,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let Some(config) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(EXIT_ERROR);
    };
    let command = match cli.command {
        Sub::Check => Command::Check,
        Sub::Nash => Command::Nash,
        Sub::Simulate => Command::Simulate,
        Sub::Sweep => Command::Sweep,
        Sub::FixedPoints => Command::FixedPoints,
    };
    let opts = Options {
        config,
        out_dir: cli.out_dir,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    match execute(command, &opts) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
