//! End-to-end checks of the command-line surface: flag validation, output
//! contracts, exit codes, and byte-stable reruns.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_penner"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn solve_emits_reference_configuration() {
    let out = bin()
        .args(["solve", "--beta", "-4", "--gamma", "3", "--t", "2.5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["scenario"], "one-cut-soft");
    assert_eq!(doc["region"], "C-");
    let a2 = doc["a2"].as_f64().unwrap();
    assert!((a2 - (3.0 - 7f64.sqrt())).abs() < 1e-9);
    assert!(doc["b1_re"].as_f64().unwrap().abs() < 1e-6);
    assert!(doc["mass_check"].as_f64().unwrap() < 1e-8);
    assert!(doc["w_spread"].as_f64().unwrap() < 1e-6);
}

#[test]
fn solve_supports_the_real_line_parameterization() {
    // The symmetric quartic-log model at v = 0.3 maps onto reduced
    // parameters (0, -1/(2 v^2), 1/(2 v^2)).
    let out = bin()
        .args(["solve", "--b", "0", "--c", "-0.25", "--v", "0.3", "--t-real", "0.5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let g = doc["gamma"].as_f64().unwrap();
    assert!((g + 1.0 / 0.18).abs() < 1e-9, "gamma = {g}");
}

#[test]
fn rejected_parameters_exit_one() {
    let out = bin()
        .args(["solve", "--beta", "0", "--gamma", "0", "--t", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma must be nonzero"));

    let out = bin().args(["phasemap", "--beta", "bad", "--gamma", "-1:1:3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn critical_coupling_prints_the_reference_value() {
    let out = bin().args(["vc"]).output().unwrap();
    assert!(out.status.success());
    let vc: f64 = stdout_of(&out).trim().parse().unwrap();
    assert!((vc - 0.269593).abs() < 1e-5, "vc = {vc}");
}

#[test]
fn flow_outputs_are_complete_and_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "flow", "--beta", "-4", "--gamma", "3", "--t-min", "0.05", "--t-max", "3", "--points",
        "16", "--out", "run",
    ];
    let out = run_in(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "param,scenario,a1,b1_re,b1_im,b2_re,b2_im,a2,a3,mass_check"
    );
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 10);
        let mass_check: f64 = cols[9].parse().unwrap();
        assert!(mass_check < 1e-8, "row fails its mass check: {line}");
    }

    let events: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_events.json")).unwrap())
            .unwrap();
    let kinds: Vec<&str> =
        events.as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"type-i-birth"));
    assert!(kinds.contains(&"type-ii-merge"));

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("run.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "flow");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);

    // Byte-identical rerun of the data files.
    let rerun_dir = tempfile::tempdir().unwrap();
    let rerun = run_in(rerun_dir.path(), &args);
    assert!(rerun.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("run.csv")).unwrap(),
        std::fs::read(rerun_dir.path().join("run.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(dir.path().join("run_events.json")).unwrap(),
        std::fs::read(rerun_dir.path().join("run_events.json")).unwrap()
    );
}

#[test]
fn vflow_reaches_the_detached_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "vflow", "--beta", "0", "--gamma", "-1", "--t", "1", "--v-start", "1", "--v-end",
            "1e-6", "--points", "12", "--out", "vrun",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("vrun.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let cols: Vec<&str> = last.split(',').collect();
    assert_eq!(cols[1], "one-cut-soft");
    let b1: f64 = cols[3].parse().unwrap();
    assert!((b1 + 1.2444).abs() < 1e-3, "terminal b1 = {b1}");
}

#[test]
fn phasemap_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["phasemap", "--beta", "-6:2:3", "--gamma", "-6:8:3", "--jobs", "2", "--out", "pm"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("pm_cells.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10); // header + 9 cells
    let boundaries = std::fs::read_to_string(dir.path().join("pm_boundaries.csv")).unwrap();
    assert!(boundaries.lines().any(|l| l.starts_with("bisector,")));
    assert!(boundaries.lines().any(|l| l.starts_with("triple-root,")));
}

#[test]
fn density_grid_covers_the_support() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "density", "--beta", "0", "--gamma", "1", "--t", "1", "--points", "64", "--out",
            "rho",
        ],
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("rho.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,density");
    assert_eq!(csv.lines().count(), 65);
    // Interior values positive, far end zero.
    let rows: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(rows[10] > 0.0);
    assert_eq!(*rows.last().unwrap(), 0.0);
}

#[test]
fn fekete_summary_reports_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["fekete", "--beta", "0", "--gamma", "1", "--t", "1", "--n", "24", "--out", "fk"],
    );
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("fk_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["n"], 24);
    let ks = summary["ks_distance"].as_f64().unwrap();
    assert!(ks < 3.0 / (24f64).sqrt(), "ks = {ks}");
    let pts = std::fs::read_to_string(dir.path().join("fk_points.csv")).unwrap();
    assert_eq!(pts.lines().count(), 25);
}

#[test]
fn json_format_emits_parseable_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "flow", "--beta", "0", "--gamma", "1", "--t-min", "0.1", "--t-max", "2", "--points",
            "8", "--format", "json", "--out", "fj",
        ],
    );
    assert!(out.status.success());
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fj.json")).unwrap())
            .unwrap();
    assert!(rows.as_array().unwrap().len() >= 8);
    assert_eq!(rows[0]["scenario"], "one-cut-hard");
}
