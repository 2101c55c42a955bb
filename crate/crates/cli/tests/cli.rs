use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn thinlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinlab"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .env_remove("THINLAB_THREADS")
        .output()
        .unwrap()
}

fn files(dir: &Path, prefix: &str) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with(prefix))
        .collect();
    names.sort();
    names
}

#[test]
fn validate_accepts_the_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = thinlab(dir.path(), &["validate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files(dir.path(), "validate-").len(), 1);
}

#[test]
fn delta_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = thinlab(dir.path(), &["delta"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let delta = v["delta"].as_f64().unwrap();
    assert!((delta - 0.320604444393886).abs() < 1e-10);
    assert!(v["residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["degree"], 16);
    let written = files(dir.path(), "delta-");
    assert_eq!(written.len(), 1);
    assert_eq!(fs::read(dir.path().join(&written[0])).unwrap(), out.stdout);
}

#[test]
fn no_write_leaves_directory_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = thinlab(dir.path(), &["--no-write", "delta"]);
    assert!(out.status.success());
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn invalid_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(thinlab(dir.path(), &["decay", "--q", "4"]).status.code(), Some(2));
    assert_eq!(thinlab(dir.path(), &["cayley", "--y", "5"]).status.code(), Some(2));

    // overlapping disks
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"generators": [[[2, 3], [1, 2]], [[3, 8], [1, 3]]]}"#).unwrap();
    let out = thinlab(dir.path(), &["--config", cfg.to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_thinlab"))
        .args(["--no-write", "validate"])
        .env("THINLAB_THREADS", "abc")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = thinlab(dir.path(), &["--config", "/nonexistent/g.json", "validate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--depth", "4", "decay", "--q", "5", "--b", "0.5", "--blocks", "2"];
    let a = thinlab(dir.path(), &args);
    let b = thinlab(dir.path(), &args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let body = String::from_utf8(a.stdout).unwrap();
    assert!(body.starts_with("q,j,norm,bound\n"));
    // two runs never share a file name
    assert_eq!(files(dir.path(), "decay-").len(), 2);
}

#[test]
fn report_merges_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert!(thinlab(dir.path(), &["cayley", "--q", "5,7"]).status.success());
    assert!(thinlab(dir.path(), &["--depth", "4", "decay", "--q", "5", "--blocks", "2"]).status.success());
    let out = thinlab(dir.path(), &["--no-write", "report"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["artifacts"].as_array().unwrap().len(), 2);
    assert!(v["per_q"]["5"]["epsilon"].as_f64().unwrap() > 0.0);
    assert!(v["per_q"]["7"]["epsilon"].as_f64().unwrap() > 0.0);
    assert_eq!(v["per_q"]["5"]["decay_below_bound"], true);
}
