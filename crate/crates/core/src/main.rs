use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hydroscale::harness::{self, Command, ExperimentConfig};

/// Exclusion processes with W-conductances and their hydrodynamic equation.
#[derive(Debug, Parser)]
#[command(name = "hydroscale", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replicate ensembles.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let base = cli.config.parent().map(|p| p.to_path_buf());
    match harness::run(
        cli.command,
        cfg,
        &cli.out,
        base.as_deref(),
        cli.seed,
        cli.threads,
    ) {
        Ok(summary) => {
            for c in summary.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAIL {}: {:e} > {:e}", c.name, c.value, c.tolerance);
            }
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
