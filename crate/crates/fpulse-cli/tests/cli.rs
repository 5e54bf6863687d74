//! End-to-end checks of the `fpulse` binary: exit codes, artifact
//! byte-determinism, table/JSON agreement, and config rejection paths.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fpulse_cli::emit::fmt;
use serde_json::Value;
use tempfile::TempDir;

fn run_in(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fpulse"));
    cmd.current_dir(dir)
        .env_remove("FPULSE_NEWTON_TOL")
        .env_remove("FPULSE_MAX_NEWTON")
        .args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("failed to spawn fpulse")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process was signalled")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn write_cfg(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn table_map(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace();
            let k = it.next().unwrap().to_string();
            let v = it.next().unwrap_or("").to_string();
            (k, v)
        })
        .collect()
}

#[test]
fn critical_json_is_byte_deterministic() {
    let tmp = TempDir::new().unwrap();
    let o1 = tmp.path().join("o1");
    let o2 = tmp.path().join("o2");
    let r1 = run_in(tmp.path(), &["--out", o1.to_str().unwrap(), "critical", "--json"], &[]);
    let r2 = run_in(tmp.path(), &["--out", o2.to_str().unwrap(), "critical", "--json"], &[]);
    assert_eq!(code(&r1), 0, "stderr: {}", stderr_str(&r1));
    assert_eq!(code(&r2), 0);
    assert_eq!(r1.stdout, r2.stdout, "repeated runs must emit identical bytes");
    let file = fs::read(o1.join("critical.json")).unwrap();
    assert_eq!(file, r1.stdout, "file must hold exactly the printed bytes");
}

#[test]
fn critical_table_agrees_with_json() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let oa = out.to_str().unwrap();
    let js = run_in(tmp.path(), &["--out", oa, "critical", "--json"], &[]);
    let tb = run_in(tmp.path(), &["--out", oa, "critical"], &[]);
    assert_eq!(code(&js), 0);
    assert_eq!(code(&tb), 0);
    let v: Value = serde_json::from_str(&stdout_str(&js)).unwrap();
    let t = table_map(&stdout_str(&tb));
    assert_eq!(t.len(), 8, "table rows: {t:?}");
    assert_eq!(t["config_hash"], v["config_hash"].as_str().unwrap());
    assert_eq!(t["c_star_sq"], fmt(v["c_star_sq"].as_f64().unwrap()));
    for key in ["c_star", "k0", "d2_sigma", "sigma_2ik0", "s0_prime", "p0_prime"] {
        assert_eq!(t[key], fmt(v["critical"][key].as_f64().unwrap()), "field {key}");
    }
}

#[test]
fn coeffs_artifact_is_deterministic_and_satisfied() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let oa = out.to_str().unwrap();
    let r1 = run_in(tmp.path(), &["--out", oa, "coeffs", "--json"], &[]);
    let r2 = run_in(tmp.path(), &["--out", oa, "coeffs", "--json"], &[]);
    assert_eq!(code(&r1), 0, "stderr: {}", stderr_str(&r1));
    assert_eq!(r1.stdout, r2.stdout);
    let v: Value = serde_json::from_str(&stdout_str(&r1)).unwrap();
    assert_eq!(v["verdict"], "satisfied");
    assert!(v["coeffs"]["sign_condition_ok"].as_bool().unwrap());
    assert!(v["condition_lhs"].as_f64().unwrap() < v["condition_rhs"].as_f64().unwrap());
    assert!(out.join("coeffs.json").is_file());
}

#[test]
fn spectrum_csv_carries_the_config_hash() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let oa = out.to_str().unwrap();
    let r1 = run_in(tmp.path(), &["--out", oa, "spectrum", "--c2", "2.9", "--json"], &[]);
    let r2 = run_in(tmp.path(), &["--out", oa, "spectrum", "--c2", "2.9", "--json"], &[]);
    assert_eq!(code(&r1), 0, "stderr: {}", stderr_str(&r1));
    assert_eq!(r1.stdout, r2.stdout);
    let v: Value = serde_json::from_str(&stdout_str(&r1)).unwrap();
    assert_eq!(v["csv"], "spectrum_c2_2.9000.csv");
    assert_eq!(
        v["winding"].as_i64().unwrap(),
        v["count_with_multiplicity"].as_i64().unwrap(),
        "winding number must account for every root"
    );
    let csv = fs::read_to_string(out.join("spectrum_c2_2.9000.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    assert_eq!(first, format!("# config {}", v["config_hash"].as_str().unwrap()));
}

#[test]
fn bad_spectrum_arguments_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let r = run_in(tmp.path(), &["spectrum", "--c2", "2.9", "--box", "nope"], &[]);
    assert_eq!(code(&r), 64);
    let r = run_in(tmp.path(), &["spectrum", "--c2", "2.9", "--box", "0x3"], &[]);
    assert_eq!(code(&r), 64);
    let r = run_in(tmp.path(), &["spectrum", "--c2", "-1.0"], &[]);
    assert_eq!(code(&r), 64);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), r#"{"bogus": 1}"#);
    let r = run_in(tmp.path(), &["--config", cfg.to_str().unwrap(), "critical"], &[]);
    assert_eq!(code(&r), 64, "stderr: {}", stderr_str(&r));

    let cfg = write_cfg(tmp.path(), r#"{"potential": {"a1": 0.0, "zzz": 2.0}}"#);
    let r = run_in(tmp.path(), &["--config", cfg.to_str().unwrap(), "critical"], &[]);
    assert_eq!(code(&r), 64, "nested unknown key must be rejected");
}

#[test]
fn invalid_config_values_are_rejected() {
    let tmp = TempDir::new().unwrap();
    for body in [
        r#"{"epsilon_list": []}"#,
        r#"{"epsilon_list": [0.04, 0.02]}"#,
        r#"{"lattice": {"dt": 0.2}}"#,
        r#"{"solver": {"n_modes": 1000}}"#,
    ] {
        let cfg = write_cfg(tmp.path(), body);
        let r = run_in(tmp.path(), &["--config", cfg.to_str().unwrap(), "critical"], &[]);
        assert_eq!(code(&r), 64, "config {body} must be rejected");
    }
}

#[test]
fn env_overrides_are_validated_and_rehashed() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let oa = out.to_str().unwrap();

    let r = run_in(tmp.path(), &["--out", oa, "critical"], &[("FPULSE_NEWTON_TOL", "bogus")]);
    assert_eq!(code(&r), 64, "unparsable env override must be a usage error");
    let r = run_in(tmp.path(), &["--out", oa, "critical"], &[("FPULSE_MAX_NEWTON", "0")]);
    assert_eq!(code(&r), 64, "zero Newton budget must fail validation");

    let base = run_in(tmp.path(), &["--out", oa, "critical", "--json"], &[]);
    let tight =
        run_in(tmp.path(), &["--out", oa, "critical", "--json"], &[("FPULSE_NEWTON_TOL", "1e-9")]);
    assert_eq!(code(&base), 0);
    assert_eq!(code(&tight), 0);
    let vb: Value = serde_json::from_str(&stdout_str(&base)).unwrap();
    let vt: Value = serde_json::from_str(&stdout_str(&tight)).unwrap();
    assert_ne!(
        vb["config_hash"], vt["config_hash"],
        "env override changes the effective config, so the hash must move"
    );
}

#[test]
fn sign_violating_potential_is_a_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(tmp.path(), r#"{"potential": {"b1": -1.0, "b2": -1.0}}"#);
    let r = run_in(tmp.path(), &["--config", cfg.to_str().unwrap(), "solve"], &[]);
    assert_eq!(code(&r), 2, "stderr: {}", stderr_str(&r));
    assert!(
        stderr_str(&r).contains("ExistenceConditionViolated"),
        "stderr: {}",
        stderr_str(&r)
    );
}

#[test]
fn simulate_requires_an_existing_profile() {
    let tmp = TempDir::new().unwrap();
    let r = run_in(tmp.path(), &["simulate"], &[]);
    assert_eq!(code(&r), 64, "missing --profile is a usage error");
    let r = run_in(tmp.path(), &["simulate", "--profile", "missing.json"], &[]);
    assert_eq!(code(&r), 64, "stderr: {}", stderr_str(&r));
}

#[test]
fn out_dir_is_created_recursively() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("deep").join("nested");
    let r = run_in(tmp.path(), &["--out", out.to_str().unwrap(), "critical"], &[]);
    assert_eq!(code(&r), 0);
    assert!(out.join("critical.json").is_file());
}

#[test]
fn solve_then_simulate_round_trip() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let oa = out.to_str().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        r#"{
            "epsilon_list": [0.08],
            "solver": {"n_modes": 1024},
            "lattice": {"n_sites": 512, "t_final": 2.0, "observe_stride": 100}
        }"#,
    );
    let ca = cfg.to_str().unwrap();

    let s1 = run_in(tmp.path(), &["--config", ca, "--out", oa, "--gnuplot", "solve", "--json"], &[]);
    assert_eq!(code(&s1), 0, "stderr: {}", stderr_str(&s1));
    let s2 = run_in(tmp.path(), &["--config", ca, "--out", oa, "--gnuplot", "solve", "--json"], &[]);
    assert_eq!(s1.stdout, s2.stdout, "solve must be byte-deterministic");

    let profile = out.join("profile_eps0.0800.json");
    assert!(profile.is_file());
    let sol: Value = serde_json::from_str(&fs::read_to_string(&profile).unwrap()).unwrap();
    let hash = sol["config_hash"].as_str().unwrap().to_string();
    assert!(sol["solution"]["residual_norm"].as_f64().unwrap() < 1e-10);
    for name in ["profile_eps0.0800.csv", "profile_eps0.0800.gp"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            format!("# config {hash}"),
            "{name} must carry the config hash"
        );
    }

    let sim = run_in(
        tmp.path(),
        &["--config", ca, "--out", oa, "simulate", "--profile", profile.to_str().unwrap(), "--json"],
        &[],
    );
    assert_eq!(code(&sim), 0, "stderr: {}", stderr_str(&sim));
    let v: Value = serde_json::from_str(&stdout_str(&sim)).unwrap();
    assert_eq!(v["config_hash"].as_str().unwrap(), hash);
    assert_eq!(v["epsilon"].as_f64().unwrap(), 0.08);
    assert!(v["energy_drift_rel"].as_f64().unwrap() < 1e-6);
    let shape = v["shape_error_final"].as_f64().unwrap();
    assert!(shape < 1e-2, "shape error {shape}");
    let c = sol["solution"]["c"].as_f64().unwrap();
    let speed = v["fit_speed"].as_f64().unwrap();
    assert!(((speed - c) / c).abs() < 0.02, "speed {speed} vs {c}");

    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), format!("# config {hash}"));
    assert!(out.join("simulate.json").is_file());
}
