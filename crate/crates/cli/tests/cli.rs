//! End-to-end runs of the `padic-diaglin` binary: JSON on stdout, exit codes,
//! and the solve → verify round trip through files.

use padic_diaglin::descent::counterexample_system;
use padic_diaglin::generators::quartic_dead_end_system;
use padic_diaglin::{Certificate, CertificateKind, DiagLinSystem, PadicContext, SolveInput};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_padic-diaglin"));
    c.env_remove("PADIC_WITNESS_BUDGET");
    c
}

fn write_input(dir: &Path, name: &str, sys: &DiagLinSystem, p: u64, k: u32) -> PathBuf {
    let path = dir.join(name);
    let input = SolveInput::from_system(sys, &PadicContext::small(p, k));
    std::fs::write(&path, serde_json::to_string(&input).unwrap()).unwrap();
    path
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn dead_end_quartic_solves_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "in.json", &quartic_dead_end_system(4), 2, 4);
    let out = bin().arg("solve").arg(&input).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cert: Certificate = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cert.kind, CertificateKind::HenselWitness);
    assert!(cert.route.iter().any(|r| r.starts_with("pow2:cycling")));
    let demo = cert.precision_demo.as_ref().unwrap();
    assert!(demo.residual_a.at_least(10) && demo.residual_b.at_least(10));
    assert!(!out.stderr.is_empty(), "summary goes to stderr");

    let cert_path = dir.path().join("cert.json");
    std::fs::write(&cert_path, &out.stdout).unwrap();
    let out = bin().arg("verify").arg(&cert_path).arg(&input).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["ok"], Value::Bool(true));
}

#[test]
fn tampered_certificate_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "in.json", &quartic_dead_end_system(4), 2, 4);
    let out = bin().arg("solve").arg(&input).arg("--precision").arg("0").output().unwrap();
    let mut cert: Value = serde_json::from_slice(&out.stdout).unwrap();
    let x = cert["payload"]["x"].as_array_mut().unwrap();
    let flipped = if x[0] == Value::String("0".into()) { "1" } else { "0" };
    x[0] = Value::String(flipped.into());
    let cert_path = dir.path().join("bad.json");
    std::fs::write(&cert_path, serde_json::to_string(&cert).unwrap()).unwrap();
    let out = bin().arg("verify").arg(&cert_path).arg(&input).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["ok"], Value::Bool(false));
}

#[test]
fn certificate_for_another_prime_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sys = quartic_dead_end_system(4);
    let input = write_input(dir.path(), "in.json", &sys, 2, 4);
    let other = write_input(dir.path(), "other.json", &sys, 3, 4);
    let out = bin().arg("solve").arg(&input).output().unwrap();
    let cert_path = dir.path().join("cert.json");
    std::fs::write(&cert_path, &out.stdout).unwrap();
    let out = bin().arg("verify").arg(&cert_path).arg(&other).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_json(&out)["failure"].as_str().unwrap().contains("context mismatch"));
}

#[test]
fn counterexample_subcommand_reports_a_verified_descent() {
    let out = bin().args(["counterexample", "5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let js = stdout_json(&out);
    assert_eq!(js["verified"], Value::Bool(true));
    assert_eq!(js["solve_kind"], Value::String("InsolubilityDescent".into()));
    assert_eq!(js["trace"]["levels"].as_array().unwrap().len(), 4);
    let out = bin().args(["counterexample", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solving_the_counterexample_is_a_verified_negative() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "in.json", &counterexample_system(5).unwrap(), 5, 4);
    let out = bin().arg("solve").arg(&input).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["kind"], Value::String("InsolubilityDescent".into()));
}

#[test]
fn gamma_star_prints_the_documented_record() {
    let out = bin().args(["gamma-star", "4", "5", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out), serde_json::json!({ "gamma_star": 5, "exhausted": true }));
}

#[test]
fn oracle_exhausts_the_dead_end_and_respects_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "in.json", &quartic_dead_end_system(4), 2, 4);
    let out = bin().arg("oracle").arg(&input).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let js = stdout_json(&out);
    assert_eq!(js["found"], Value::Bool(false));
    assert_eq!(js["exhausted"], Value::Bool(true));

    let out = bin().arg("oracle").arg(&input).args(["--budget", "5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    let out = bin().arg("oracle").arg(&input).env("PADIC_WITNESS_BUDGET", "5").output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn normalize_prints_a_conditioned_system() {
    let dir = tempfile::tempdir().unwrap();
    let sys = DiagLinSystem::from_i64(&[50, 3, 7, 25, 1, 2], &[5, 1, 10, 3, 4, 6]);
    let input = write_input(dir.path(), "in.json", &sys, 5, 4);
    let out = bin().arg("normalize").arg(&input).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let js = stdout_json(&out);
    assert_eq!(js["system"]["a"].as_array().unwrap().len(), 6);
    assert!(js["stats"].is_object());
}

#[test]
fn malformed_inputs_exit_with_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"k": 4, "p": "5", "a": ["1", "2"], "b": ["1"]}"#).unwrap();
    let out = bin().arg("solve").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout_json(&out)["error"], Value::String("invalid_input".into()));

    std::fs::write(&bad, r#"{"k": 4, "p": "6", "a": ["1", "2"], "b": ["1", "1"]}"#).unwrap();
    assert_eq!(bin().arg("solve").arg(&bad).output().unwrap().status.code(), Some(3));

    std::fs::write(&bad, "not json").unwrap();
    assert_eq!(bin().arg("solve").arg(&bad).output().unwrap().status.code(), Some(3));

    assert_eq!(bin().args(["solve", "--engine", "nope", "x.json"]).output().unwrap().status.code(), Some(3));
}

#[test]
fn engine_override_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "in.json", &quartic_dead_end_system(4), 2, 4);
    let out = bin().arg("solve").arg(&input).args(["--engine", "pow2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let cert: Certificate = serde_json::from_slice(&out.stdout).unwrap();
    assert!(cert.route.iter().all(|r| r.starts_with("pow2")), "{:?}", cert.route);
}
