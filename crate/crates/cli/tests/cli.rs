use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn riskchoice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskchoice")).args(args).output().expect("binary runs")
}

fn design_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/design")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &TempDir, agents: &str) -> PathBuf {
    let choices = dir.path().join("choices.csv");
    let summary = dir.path().join("summary.json");
    let out = riskchoice(&[
        "simulate",
        "--agents",
        agents,
        "--population",
        "mixed",
        "--noise",
        "0.05",
        "--seed",
        "5",
        "--out",
        path(&choices),
        "--summary",
        path(&summary),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    choices
}

#[test]
fn analysis_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let choices = simulate(&dir, "24");
    let run = |extra: &[&str]| {
        let mut args = vec!["analyze", "--choices", path(&choices), "--seed", "5"];
        args.extend_from_slice(extra);
        let out = riskchoice(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let first = run(&[]);
    let second = run(&["--sequential"]);
    assert!(first == second, "reports differ");
    let report: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["aggregates"]["subjects"], 24);
}

#[test]
fn simulation_is_reproducible_from_its_seed() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(fs::read(simulate(&a, "9")).unwrap(), fs::read(simulate(&b, "9")).unwrap());
    assert_eq!(fs::read(a.path().join("summary.json")).unwrap(), fs::read(b.path().join("summary.json")).unwrap());
}

#[test]
fn csv_export_has_one_row_per_subject() {
    let dir = TempDir::new().unwrap();
    let choices = simulate(&dir, "6");
    let out = riskchoice(&["analyze", "--choices", path(&choices), "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().next().unwrap().starts_with("subject_id,"));
}

#[test]
fn explicit_design_matches_builtin() {
    let dir = TempDir::new().unwrap();
    let choices = simulate(&dir, "6");
    let builtin = riskchoice(&["analyze", "--choices", path(&choices)]);
    let explicit = riskchoice(&["analyze", "--choices", path(&choices), "--design", path(&design_dir())]);
    assert!(builtin.status.success() && explicit.status.success());
    let strip = |o: &Output| {
        let mut v: Value = serde_json::from_slice(&o.stdout).unwrap();
        v["config"]["design"] = Value::Null;
        v
    };
    assert_eq!(strip(&builtin), strip(&explicit));
}

#[test]
fn empty_choices_file_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let choices = dir.path().join("empty.csv");
    fs::write(&choices, "subject_id,trial_index,menu_id,outcome\n").unwrap();
    let out = riskchoice(&["analyze", "--choices", path(&choices)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn chosen_lottery_outside_menu_is_rejected() {
    let dir = TempDir::new().unwrap();
    let choices = dir.path().join("bad.csv");
    fs::write(&choices, "subject_id,trial_index,menu_id,outcome\ns1,1,1,D\n").unwrap();
    let out = riskchoice(&["analyze", "--choices", path(&choices)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not on menu"));
}

#[test]
fn bad_arguments_exit_with_validation_code() {
    assert_eq!(riskchoice(&["analyze"]).status.code(), Some(1));
    assert_eq!(riskchoice(&["analyze", "--choices", "x.csv", "--merge-threshold", "2"]).status.code(), Some(1));
    assert_eq!(riskchoice(&["analyze", "--choices", "/nonexistent/choices.csv"]).status.code(), Some(1));
    assert_eq!(riskchoice(&["--help"]).status.code(), Some(0));
}

#[test]
fn audit_reports_exact_dominance() {
    let out = riskchoice(&["audit-dominance"]);
    assert!(out.status.success());
    let audit: Value = serde_json::from_slice(&out.stdout).unwrap();
    let flagged: Vec<&str> =
        audit["discrepancies"].as_array().unwrap().iter().map(|c| c["menu"].as_str().unwrap()).collect();
    assert_eq!(flagged, ["2", "3", "5", "7", "12", "13", "14"]);
    assert_eq!(audit["cdf_table"][0]["values"], serde_json::json!(["1/10", "1/10", "7/10", "1", "1"]));

    let dir = TempDir::new().unwrap();
    let file = dir.path().join("audit.json");
    let out = riskchoice(&["audit-dominance", "--design", path(&design_dir()), "--out", path(&file)]);
    assert!(out.status.success());
    let from_file: Value = serde_json::from_slice(&fs::read(file).unwrap()).unwrap();
    assert_eq!(from_file, audit);
}
