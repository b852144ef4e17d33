use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ufhc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ufhc")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn without_timestamp(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn density_of_evens_passes() {
    let out = ufhc(&[
        "density",
        "--set",
        r#"{"kind":"periodic","modulus":2,"residues":[0]}"#,
        "--horizon",
        "100000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["passed"], true);
    assert!(r["config_hash"].as_str().is_some_and(|h| h.len() == 64));
}

#[test]
fn missing_set_is_a_usage_error() {
    let out = ufhc(&["density"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("set"));
}

#[test]
fn bad_json_flag_is_a_usage_error() {
    let out = ufhc(&["density", "--set", "{not json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_for_other_command_is_rejected() {
    let out = ufhc(&["--config", &fixture("chaos.json"), "ctype", "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("chaos-not-ufhca"));
}

#[test]
fn invalid_field_reports_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"command":"ctype-validate-params","delta":[1,"x"],"tau_rule":"half-delta"}"#).unwrap();
    let out = ufhc(&["--config", path.to_str().unwrap(), "ctype", "validate-params"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta[1]"));
}

#[test]
fn chaos_audit_is_deterministic() {
    let a = ufhc(&["audit", "chaos-not-ufhca"]);
    let b = ufhc(&["audit", "chaos-not-ufhca"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(without_timestamp(report(&a)), without_timestamp(report(&b)));
}

#[test]
fn tau_equal_to_delta_fails_the_audit() {
    let out = ufhc(&["--config", &fixture("tau-equals-delta.json"), "audit", "chaos-not-ufhca"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("FAIL params/chaos-proxy"), "{stderr}");
}

#[test]
fn validate_params_flags() {
    let ok = ufhc(&["ctype", "validate-params", "--delta", "1,10,36", "--kmax", "2"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = ufhc(&["ctype", "validate-params", "--delta", "1,10,36", "--tau", "0,10,36"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn out_directory_gets_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = ufhc(&["--out", dir.path().to_str().unwrap(), "ctype", "simulate", "--steps", "40"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ctype-simulate.json")).unwrap()).unwrap();
    assert_eq!(r["passed"], true);
    let orbit = fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert_eq!(orbit.lines().count(), 42);
    let checks = fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    assert!(checks.starts_with("name,passed,value,threshold,horizon\n"));
}

#[test]
fn csv_format_prints_first_table() {
    let out = ufhc(&["--format", "csv", "weights", "sparse-set", "--kmax", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 7, "{text}");
}

#[test]
fn furstenberg_exit_code_follows_membership() {
    let evens = r#"{"kind":"periodic","modulus":2,"residues":[0]}"#;
    let args = |delta: &'static str| {
        ufhc(&["furstenberg", "check", "--family", "ud", "--delta", delta, "--n", "10", "--set", evens, "--bound", "1000"])
    };
    assert_eq!(args("0.4").status.code(), Some(0));
    assert_eq!(args("0.9").status.code(), Some(1));
}
