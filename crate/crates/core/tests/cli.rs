//! End-to-end runs of the `hydroscale` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const MEMBRANE: &str = r#"{"dim": 1, "axes": [{"slope": 1.0, "atoms": [[0.5, 1.0]]}]}"#;
const IDENTITY: &str = r#"{"dim": 1, "axes": [{"slope": 1.0}]}"#;

struct Run {
    dir: TempDir,
    output: Output,
}

impl Run {
    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out().join(name)).unwrap()
    }

    fn summary(&self) -> Value {
        serde_json::from_str(&self.read("summary.json")).unwrap()
    }

    fn code(&self) -> Option<i32> {
        self.output.status.code()
    }
}

fn hydroscale(command: &str, config: &str, extra: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, config).unwrap();
    let output = invoke(command, &cfg, &dir.path().join("out"), extra);
    Run { dir, output }
}

fn invoke(command: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydroscale"))
        .arg(command)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

/// Rows of a CSV file below its header, split on commas.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn spectrum_of_identity_walk_on_four_sites() {
    let run = hydroscale(
        "spectrum",
        &format!(r#"{{"profile": {IDENTITY}, "n": [4]}}"#),
        &[],
    );
    assert_eq!(
        run.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.output.stderr)
    );
    let csv = run.read("spectrum_n4.csv");
    assert!(csv.starts_with("k,eigenvalue\n"));
    let eig: Vec<f64> = rows(&csv).iter().map(|r| r[1].parse().unwrap()).collect();
    for (got, want) in eig.iter().zip([0.0, 32.0, 32.0, 64.0]) {
        assert!((got - want).abs() < 1e-10, "{eig:?}");
    }
    let summary = run.summary();
    assert_eq!(summary["command"], "spectrum");
    assert_eq!(summary["passed"], true);
    assert!(summary["checks"].as_array().unwrap().len() > 5);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let run = hydroscale(
        "spectrum",
        &format!(r#"{{"profile": {MEMBRANE}, "n": [8]}}"#),
        &[],
    );
    for row in rows(&run.read("spectrum_n8.csv")) {
        let mantissa = row[1].split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.replace('.', "").len(), 17, "{}", row[1]);
    }
}

#[test]
fn zero_replicates_is_a_validation_error() {
    let run = hydroscale(
        "simulate",
        &format!(r#"{{"profile": {MEMBRANE}, "n": [8], "replicates": 0}}"#),
        &[],
    );
    assert_eq!(run.code(), Some(2));
    assert!(!run.out().join("summary.json").exists());
}

#[test]
fn invalid_configs_are_rejected_before_work() {
    for cfg in [
        format!(r#"{{"profile": {MEMBRANE}, "n": [8], "a": -0.5}}"#),
        format!(r#"{{"profile": {MEMBRANE}, "n": [3]}}"#),
        format!(r#"{{"profile": {MEMBRANE}, "n": [8], "phi": [-2.0]}}"#),
        r#"{"profile": {"dim": 1, "axes": [{"slope": -1.0}]}, "n": [8]}"#.to_string(),
        format!(r#"{{"profile": {MEMBRANE}, "n": [8], "unknown": 1}}"#),
    ] {
        let run = hydroscale("pde", &cfg, &[]);
        assert_eq!(run.code(), Some(2), "accepted {cfg}");
    }
}

#[test]
fn all_occupied_lattice_stays_full() {
    let run = hydroscale(
        "simulate",
        &format!(
            r#"{{"profile": {MEMBRANE}, "n": [8], "replicates": 3,
                "initial": {{"kind": "constant", "value": 1.0}},
                "observable_times": [0.0, 0.02, 0.05]}}"#
        ),
        &[],
    );
    assert_eq!(run.code(), Some(0));
    let occ = rows(&run.read("trajectories_n8.csv"));
    assert_eq!(occ.len(), 3 * 3 * 8);
    assert!(occ.iter().all(|r| r[3] == "1"));
    assert_eq!(run.summary()["scalars"]["n8/mean_jump_count"], 0.0);
}

#[test]
fn runs_are_byte_identical_for_a_fixed_seed() {
    let cfg = format!(
        r#"{{"profile": {MEMBRANE}, "n": [16], "a": 0.2, "replicates": 6,
            "initial": {{"kind": "cosine", "mean": 0.5, "amplitude": 0.3}},
            "observable_times": [0.01, 0.05], "simulate": {{"box_side": 4}}}}"#
    );
    let first = hydroscale("simulate", &cfg, &["--seed", "11"]);
    let again = invoke(
        "simulate",
        &first.dir.path().join("config.json"),
        &first.dir.path().join("again"),
        &["--seed", "11", "--threads", "1"],
    );
    assert_eq!(again.status.code(), Some(0));
    for name in ["trajectories_n16.csv", "density_n16.csv"] {
        let a = fs::read(first.out().join(name)).unwrap();
        let b = fs::read(first.dir.path().join("again").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    let other = hydroscale("simulate", &cfg, &["--seed", "12"]);
    assert_ne!(
        first.read("trajectories_n16.csv"),
        other.read("trajectories_n16.csv")
    );
    assert_eq!(first.summary()["seed"], 11);
}

#[test]
fn constant_initial_density_is_stationary_for_the_pde() {
    let run = hydroscale(
        "pde",
        &format!(
            r#"{{"profile": {MEMBRANE}, "n": [16], "a": 0.2,
                "initial": {{"kind": "constant", "value": 0.3}}, "pde": {{"stored_times": 8}}}}"#
        ),
        &[],
    );
    assert_eq!(
        run.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.output.stderr)
    );
    let sol = rows(&run.read("pde_n16.csv"));
    assert_eq!(sol.len(), 8 * 16);
    for r in &sol {
        let rho: f64 = r[2].parse().unwrap();
        assert!((rho - 0.3).abs() < 1e-15);
    }
    let summary = run.summary();
    let residuals: Vec<&Value> = summary["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["name"].as_str().unwrap().contains("weak_residual"))
        .collect();
    assert!(!residuals.is_empty());
    assert!(residuals
        .iter()
        .all(|c| c["value"].as_f64().unwrap() < 1e-14));
    assert!(run
        .read("energy.csv")
        .starts_with("axis,n,energy,a,phi,horizon\n"));
}

#[test]
fn heat_case_reports_the_spectral_oracle() {
    let run = hydroscale(
        "pde",
        &format!(
            r#"{{"profile": {IDENTITY}, "n": [32], "horizon": 0.01,
                "initial": {{"kind": "cosine", "mean": 0.5, "amplitude": 0.3}},
                "pde": {{"dt": 1e-7, "linear_tol": 1e-6}}}}"#
        ),
        &[],
    );
    assert_eq!(
        run.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.output.stderr)
    );
    let checks = run.summary()["checks"].clone();
    let oracle = checks
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "n32/linear_spectral_oracle")
        .expect("oracle check present");
    assert_eq!(oracle["passed"], true);
}

#[test]
fn converge_writes_one_row_per_grid_and_time() {
    let run = hydroscale(
        "converge",
        &format!(
            r#"{{"profile": {MEMBRANE}, "n": [8, 16], "replicates": 4,
                "initial": {{"kind": "constant", "value": 0.5}},
                "observable_times": [0.02, 0.05],
                "test_functions": [{{"kind": "constant", "value": 1.0}}]}}"#
        ),
        &[],
    );
    assert!(run.code() == Some(0) || run.code() == Some(1));
    let csv = run.read("convergence.csv");
    assert!(csv.starts_with(
        "n,test_function,time,mean_abs_error,stderr,replicates,mean_pairing,reference,bias\n"
    ));
    let r = rows(&csv);
    assert_eq!(r.len(), 2 * 2);
    assert_eq!(run.summary()["scalars"]["n_ref"], 64.0);
}

#[test]
fn converge_needs_two_ascending_grids() {
    let run = hydroscale(
        "converge",
        &format!(r#"{{"profile": {MEMBRANE}, "n": [16, 8], "replicates": 4}}"#),
        &[],
    );
    assert_eq!(run.code(), Some(2));
}

#[test]
fn frozen_lattice_has_vanishing_diagnostics() {
    let run = hydroscale(
        "diagnose",
        &format!(
            r#"{{"profile": {MEMBRANE}, "n": [16], "a": 0.2, "replicates": 3,
                "initial": {{"kind": "constant", "value": 1.0}},
                "diagnose": {{"snapshots": 8}}}}"#
        ),
        &[],
    );
    assert!(
        run.code().is_some_and(|c| c < 2),
        "{}",
        String::from_utf8_lossy(&run.output.stderr)
    );
    for r in rows(&run.read("diagnose.csv")) {
        let mean: f64 = r[3].parse().unwrap();
        match r[1].as_str() {
            "replacement_gap" => assert_eq!(mean, 0.0, "{r:?}"),
            // the drift is a sum of terms cancelling only up to rounding
            "martingale_final" | "martingale_sup" => assert!(mean.abs() < 1e-15, "{r:?}"),
            _ => {}
        }
    }
}
