use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use habopt::{execute, Invocation, Scenario};

/// Total-population maximization experiments.
#[derive(Parser, Debug)]
#[command(name = "habopt", version)]
struct Cli {
    scenario: Scenario,
    /// JSON config document.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel solves.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = execute(&Invocation {
        scenario: cli.scenario,
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        threads: cli.threads,
    });
    if let Some(e) = &outcome.error {
        eprintln!("habopt: {e}");
    }
    if let Some(dir) = &outcome.out_dir {
        println!("{}", dir.display());
    }
    ExitCode::from(outcome.exit_code as u8)
}
