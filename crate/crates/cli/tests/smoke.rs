//! End-to-end smoke tests for the `aircover` binary: a feasible solve must
//! produce the documented artifact layout and exit 0, an impossible energy
//! budget must exit 2, and plots must re-render from artifacts alone.

use std::path::Path;
use std::process::{Command, Output};

fn aircover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aircover"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed (status {:?}):\n{}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn solve_round_trip_writes_artifacts() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out_dir = dir.path().join("run");
    let out_str = out_dir.to_str().expect("utf-8 path");
    let out = aircover(&[
        "solve", "--seed", "1", "--num-users", "2", "--T", "60", "--etot", "12000", "--out",
        out_str,
    ]);
    assert_success(&out, "solve");

    let scenario_text =
        std::fs::read_to_string(out_dir.join("scenario.json")).expect("scenario.json written");
    let scenario: serde_json::Value = serde_json::from_str(&scenario_text).expect("valid json");
    assert_eq!(scenario["users"].as_array().map(Vec::len), Some(2));
    assert!(out_dir.join("runs").join("solve_nominal.json").is_file());
    assert!(svg_count(&out_dir.join("plots")) >= 1);

    let replot = aircover(&["plot", "--out", out_str]);
    assert_success(&replot, "plot re-render");
    assert!(svg_count(&out_dir.join("plots")) >= 1);
}

#[test]
fn impossible_energy_budget_exits_with_code_two() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out_dir = dir.path().join("run");
    let out = aircover(&[
        "solve", "--seed", "1", "--num-users", "2", "--T", "60", "--etot", "500", "--out",
        out_dir.to_str().expect("utf-8 path"),
    ]);
    assert_eq!(out.status.code(), Some(2), "tiny budget must exit 2");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("energy"), "stderr explains the failure: {stderr}");
}

#[test]
fn baseline_reports_static_coverage() {
    let out = aircover(&["baseline", "--seed", "1", "--T", "60", "--etot", "12000"]);
    assert_success(&out, "baseline");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("static-tdma"), "stdout: {stdout}");
    assert!(stdout.contains("static-fdma"), "stdout: {stdout}");
}

fn svg_count(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(Result::ok)
                .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
                .count()
        })
        .unwrap_or(0)
}
