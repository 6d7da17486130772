use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use paraxial::cli::workflows::{execute, Workflow};

/// Nonlinear paraxial beam propagation: split-step solver, moment laws and
/// the nonlinear ABCD q-law.
#[derive(Parser)]
#[command(name = "paraxial", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the split-step solver and record the moment trajectory.
    Propagate(Common),
    /// Integrate the moment equations only, no field solve.
    Predict(Common),
    /// Run the solver and the analytic laws side by side.
    Compare(Common),
    /// Run `compare` over the values of the [sweep] parameter.
    Sweep(Common),
    /// Infer the velocity dispersion from time-of-flight widths.
    AnalyzeTof(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Accepted for reproducible scripts; no workflow draws random numbers.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (workflow, common) = match cli.command {
        Command::Propagate(c) => (Workflow::Propagate, c),
        Command::Predict(c) => (Workflow::Predict, c),
        Command::Compare(c) => (Workflow::Compare, c),
        Command::Sweep(c) => (Workflow::Sweep, c),
        Command::AnalyzeTof(c) => (Workflow::AnalyzeTof, c),
    };
    if let Some(t) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(workflow, &common.config, &common.out) {
        Ok(outcome) => {
            if outcome.pass {
                println!("{}", outcome.message);
            } else {
                eprintln!("invariant check failed: {}", outcome.message);
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
