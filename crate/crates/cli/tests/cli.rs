use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qst-lre")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn static_sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), r#"{"budget": {"eps_p": 0.01}}"#);
    let o = run(&["static-sweep", "--config", &config, "--trials", "5", "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "sweep_var,mse_empirical,bound_nominal,bound_perturbed,robust_shift,robust_envelope,admissible_fraction"
    );
    assert_eq!(lines.len(), 6);
    assert!(!csv.contains('\r'));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"master_seed\": 9"));
    assert!(manifest.contains("\"trials\": 5"));
}

#[test]
fn rerun_from_manifest_reproduces_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let o = run(&["dynamic-sweep", "--trials", "8", "--seed", "4", "--out", first.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = first.join("manifest.json");
    let o = run(&["dynamic-sweep", "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(first.join("results.csv")).unwrap(), fs::read(second.join("results.csv")).unwrap());
}

#[test]
fn bounds_leave_mse_column_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let o = run(&["bounds", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').nth(1), Some(""), "{line}");
    }
}

#[test]
fn qubit_sweep_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q");
    let config = write_config(
        dir.path(),
        r#"{"sweep_values": [1, 2], "shots_per_config": 1000, "budget": {"eps_p": 0.001, "admissible_fraction": 0.5}}"#,
    );
    let o = run(&["qubit-sweep", "--config", &config, "--trials", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("1,"));
    assert!(csv.lines().nth(2).unwrap().starts_with("2,"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), r#"{"trails": 5}"#);
    let o = run(&["static-sweep", "--config", &unknown]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trails"));

    let o = run(&["static-sweep", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let mismatch = write_config(dir.path(), r#"{"experiment": "dynamic-n-sweep"}"#);
    assert_eq!(run(&["static-sweep", "--config", &mismatch]).status.code(), Some(2));

    assert_eq!(run(&["static-sweep", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(run(&["static-sweep", "--seed", "minus-one"]).status.code(), Some(2));
}

#[test]
fn budget_past_limit_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w");
    let config = write_config(dir.path(), r#"{"budget": {"eps_p": 0.2}}"#);
    let o = run(&["bounds", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",inf,inf,0")), "{csv}");
}

#[test]
fn runtime_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&["bounds", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}
