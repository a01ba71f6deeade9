//! Command-line experiments: each command reads an [`ExperimentConfig`],
//! writes CSV files into the output directory and a `summary.json`.

mod checks;
mod commands;
mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use checks::{generator_checks, Check, DENSE_LIMIT};
pub use config::{
    ConvergeOptions, DiagnoseOptions, ExperimentConfig, PdeOptions, SimulateOptions,
    SpectrumOptions,
};

use crate::ensemble::with_threads;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Spectrum,
    Simulate,
    Pde,
    Converge,
    Diagnose,
}

/// Machine-readable record of one command run.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: Command,
    pub seed: u64,
    pub threads: Option<usize>,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub scalars: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

/// Output sink handed to the commands.
pub(crate) struct Report {
    dir: PathBuf,
    pub checks: Vec<Check>,
    pub scalars: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

impl Report {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            checks: Vec::new(),
            scalars: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    pub fn scalar(&mut self, key: impl Into<String>, value: f64) {
        self.scalars.insert(key.into(), value);
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn check_flag(
        &mut self,
        name: impl Into<String>,
        passed: bool,
        value: f64,
        tolerance: f64,
    ) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            value,
            tolerance,
        });
    }
}

/// Runs `command`, writing outputs to `out`. `seed` overrides the config's
/// seed; relative CSV profile paths resolve against `base`.
pub fn run(
    command: Command,
    mut cfg: ExperimentConfig,
    out: &Path,
    base: Option<&Path>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<Summary> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let mut report = Report::new(out);
    with_threads(threads, || match command {
        Command::Spectrum => commands::spectrum(&cfg, &mut report),
        Command::Simulate => commands::simulate(&cfg, base, &mut report),
        Command::Pde => commands::pde(&cfg, base, &mut report),
        Command::Converge => commands::converge(&cfg, base, &mut report),
        Command::Diagnose => commands::diagnose(&cfg, base, &mut report),
    })?;
    let summary = Summary {
        command,
        seed: cfg.seed,
        threads,
        passed: report.checks.iter().all(|c| c.passed),
        checks: report.checks,
        scalars: report.scalars,
        outputs: report.outputs,
    };
    let file = File::create(out.join("summary.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &summary)?;
    Ok(summary)
}
