//! End-to-end checks of the command-line interface: result payloads, exit
//! codes, reproducibility, and the file outputs.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chaos-tails"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("chaos-tails-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn exponent_m_value() {
    let out = run(&["exponent", "--name", "M", "--q", "2,2"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn exponent_moment_constant() {
    let out = run(&["exponent", "--name", "gamma_moment", "--d", "2"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["value"].as_f64().unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn exponent_rejects_nonpositive_orders() {
    let out = run(&["exponent", "--name", "M", "--q", "0,2"]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["error"]["kind"], "invalid_input");
}

#[test]
fn exponent_handles_infinite_orders_and_t() {
    let out = run(&["exponent", "--name", "Nd", "--q", "inf,inf"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let out = run(&["exponent", "--name", "t", "--d", "2", "--k", "1", "--rank", "1"]);
    let v = stdout_json(&out);
    assert!((v["value"].as_f64().unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn bound_moment_curve_matches_closed_form() {
    let dir = temp_dir("bound6");
    let assumptions = dir.join("a.json");
    std::fs::write(
        &assumptions,
        r#"{"d":1,"moments":[{"kind":"constant","value":1.0}]}"#,
    )
    .unwrap();
    let out = run(&[
        "bound",
        "--mode",
        "moment",
        "--theorem",
        "6",
        "--assumptions",
        assumptions.to_str().unwrap(),
        "--p",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let val = v["result"]["curve"]["points"][0][1].as_f64().unwrap();
    assert!((val - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
}

#[test]
fn bound_kernel_envelope_exponent() {
    let dir = temp_dir("bound9");
    let assumptions = dir.join("a.json");
    std::fs::write(&assumptions, r#"{"d":2,"kernel_q":2.0,"kernel_r":1.0}"#).unwrap();
    let csv = dir.join("curve.csv");
    let out = run(&[
        "bound",
        "--mode",
        "tail",
        "--theorem",
        "9",
        "--assumptions",
        assumptions.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["result"]["curve"]["tail"]["q"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("x,bound\n"));
}

#[test]
fn bound_rejects_small_moment_orders() {
    let dir = temp_dir("bound7");
    let assumptions = dir.join("a.json");
    std::fs::write(
        &assumptions,
        r#"{"d":1,"moments":[{"kind":"constant","value":1.0}],"independence":"totally_independent"}"#,
    )
    .unwrap();
    let out = run(&[
        "bound",
        "--mode",
        "moment",
        "--theorem",
        "7",
        "--assumptions",
        assumptions.to_str().unwrap(),
        "--p",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_small_instance_and_cap() {
    let out = run(&["oracle", "--d", "1", "--n", "4", "--x", "1.5"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["tail"].as_f64().unwrap() - 0.0625).abs() < 1e-15);

    let out = run(&["oracle", "--d", "3", "--n", "10", "--x", "1.0"]);
    assert_eq!(out.status.code(), Some(4));
    let v = stdout_json(&out);
    assert_eq!(v["error"]["kind"], "too_large");
}

fn small_campaign_json() -> String {
    r#"{
        "name": "cli-azuma",
        "seed": 777,
        "family": {"distribution": {"kind": "rademacher"}, "d": 1, "n": 16},
        "field": {"kind": "uniform"},
        "replications": 3000,
        "x_grid": {"kind": "explicit", "values": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]},
        "bound": {"kind": "parametric", "y": 1.0, "k": 2.8284271247461903, "q": 2.0, "rho": 0.0}
    }"#
    .to_string()
}

#[test]
fn verify_passes_and_writes_files() {
    let dir = temp_dir("verify");
    let cfg = dir.join("c.json");
    std::fs::write(&cfg, small_campaign_json()).unwrap();
    let out = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report_path = dir.join("cli-azuma.report.json");
    assert!(report_path.exists());
    assert!(dir.join("cli-azuma.tail.csv").exists());

    // the report subcommand summarises the stored report
    let out = run(&["report", "--report", report_path.to_str().unwrap()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "pass");
}

#[test]
fn verify_fails_when_bound_is_scaled_down() {
    let dir = temp_dir("falsify");
    let cfg = dir.join("c.json");
    std::fs::write(&cfg, small_campaign_json()).unwrap();
    let out = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--scale-bound",
        "0.01",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_rejects_mismatched_independence() {
    let dir = temp_dir("assume");
    let cfg = dir.join("c.json");
    std::fs::write(
        &cfg,
        r#"{
            "name": "dependent-vs-independent",
            "seed": 3,
            "family": {"distribution": {"kind": "dependent_martingale"}, "d": 1, "n": 8},
            "field": {"kind": "uniform"},
            "replications": 500,
            "bound": {"kind": "recursion_independent"}
        }"#,
    )
    .unwrap();
    let out = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let v = stdout_json(&out);
    assert_eq!(v["error"]["kind"], "assumption_violated");
}

#[test]
fn simulate_is_reproducible_modulo_header() {
    let dir = temp_dir("repro");
    let cfg = dir.join("c.json");
    std::fs::write(&cfg, small_campaign_json()).unwrap();
    let a = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    let b = bin()
        .args(["simulate", "--config", cfg.to_str().unwrap()])
        .env("CHAOS_TAILS_WORKERS", "2")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    let va = stdout_json(&a);
    let vb = stdout_json(&b);
    assert_eq!(va["body"], vb["body"], "report bodies must be byte-identical");
    assert_ne!(va["header"], serde_json::Value::Null);
}

#[test]
fn unknown_config_keys_exit_two() {
    let dir = temp_dir("schema");
    let cfg = dir.join("c.json");
    std::fs::write(&cfg, r#"{"name":"x","seed":1,"bogus":true}"#).unwrap();
    let out = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
