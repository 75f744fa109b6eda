use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn preq(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_preq"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("PREQ_DEFAULT_SEED")
        .output()
        .expect("binary runs")
}

fn run_scenario(command: &str, name: &str) -> (TempDir, Output) {
    let dir = TempDir::new().unwrap();
    let cfg = scenario(name);
    let out = preq(&[command, "--config", cfg.to_str().unwrap()], dir.path());
    (dir, out)
}

fn inline(json: &str) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("scenario.json");
    fs::write(&path, json).unwrap();
    (dir, path)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

/// Column `name` of a CSV file as floats.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

#[test]
fn scalar_growth_ends_at_e() {
    let (dir, out) = run_scenario("propagate", "scalar_growth.json");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let b = column(&dir.path().join("covariance.csv"), "re_0_0");
    let e = std::f64::consts::E;
    assert!(((b.last().unwrap() - e) / e).abs() < 1e-8);
    assert_eq!(b[0], 1.0);
}

#[test]
fn amplitude_damping_density_keeps_unit_trace() {
    let (dir, out) = run_scenario("propagate", "amplitude_damping.json");
    assert!(out.status.success());
    let traces = column(&dir.path().join("density.csv"), "trace");
    assert!(traces.iter().all(|t| (t - 1.0).abs() <= 1e-8));
    // |1⟩⟨1| decays towards |0⟩⟨0|.
    let excited = column(&dir.path().join("density.csv"), "re_1_1");
    assert!((excited.last().unwrap() - (-0.7f64 * 3.0).exp()).abs() < 1e-8);
    let r = report(dir.path());
    assert!(r["summary"]["density.trace_max"].as_f64().unwrap() <= 1.0 + 1e-8);
}

#[test]
fn commutator_flow_keeps_spectrum() {
    let (dir, out) = run_scenario("propagate", "von_neumann.json");
    assert!(out.status.success());
    let path = dir.path().join("covariance.csv");
    assert!(spread(&column(&path, "min_eigenvalue")) <= 1e-8);
    assert!(spread(&column(&path, "trace")) <= 1e-8);
}

#[test]
fn json_trajectory_format() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario("scalar_growth.json");
    let out = preq(&["propagate", "--config", cfg.to_str().unwrap(), "--format", "json"], dir.path());
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("covariance.json")).unwrap()).unwrap();
    assert_eq!(doc["kind"], "covariance");
    assert_eq!(doc["t"].as_array().unwrap().len(), 201);
    assert_eq!(doc["values"][0], serde_json::json!([[[1.0, 0.0]]]));
}

#[test]
fn bridge_on_random_instance_passes() {
    let (dir, out) = run_scenario("verify", "bridge_random.json");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    let bridge = &r["checks"][0];
    assert_eq!(bridge["check"], "bridge");
    assert_eq!(bridge["n"], 3);
    assert_eq!(bridge["N"], 100000);
    assert_eq!(bridge["seed"], 4);
    assert!(bridge["std_error"].as_f64().unwrap() > 0.0);
    assert_eq!(r["pass"], true);
    // The report printed on stdout is the one written to disk.
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout, r);
}

#[test]
fn moment_check_on_zero_generator() {
    let (_keep, cfg) = inline(
        r#"{"dim": 3, "generator": {"kind": "similarity", "a": [[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]]]},
            "seed": 1, "verify": {"checks": ["moment"], "random_instance": true}}"#,
    );
    let dir = TempDir::new().unwrap();
    let out = preq(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["checks"][0]["value"], 0.0);
    assert_eq!(r["checks"][0]["generator_kind"], "similarity");
}

#[test]
fn nonlinear_matches_normalized_similarity_flow() {
    let (dir, out) = run_scenario("verify", "similarity_nonlinear.json");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    let c = r["checks"].as_array().unwrap().iter().find(|c| c["check"] == "nonlinear-vs-normalized").unwrap();
    assert!(c["value"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn failing_check_exits_with_one() {
    let (_keep, cfg) = inline(
        r#"{"dim": 1, "generator": {"kind": "similarity", "a": [[[1,0]]]},
            "verify": {"checks": ["trace-preserving"]}}"#,
    );
    let dir = TempDir::new().unwrap();
    let out = preq(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(dir.path())["pass"], false);
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL trace-preserving"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        r#"{"dim": 1, "verify": {"checks": ["nope"]}}"#,
        r#"{"dim": 1, "colour": "blue"}"#,
        r#"{"dim": 1, "initial": [[[1,0],[0,0]]]}"#,
        r#"not json"#,
    ];
    for text in cases {
        let (_keep, cfg) = inline(text);
        let out = preq(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
        assert_eq!(out.status.code(), Some(2), "{text}");
    }
    let (_keep, cfg) = inline(r#"{"dim": 1, "verify": {"checks": ["nope"]}}"#);
    let out = preq(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("available checks") && stderr.contains("nonlinear-vs-normalized"));

    let out = preq(&["verify", "--config", "/nonexistent/scenario.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = preq(&["frobnicate", "--config", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let cfg = scenario("bridge_random.json");
    let out = preq(&["verify", "--config", cfg.to_str().unwrap(), "--workers", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_resolution_order() {
    let (_keep, cfg) = inline(r#"{"dim": 2, "samples": 100, "verify": {"checks": ["dispersion"], "random_instance": true}}"#);
    let cfg = cfg.to_str().unwrap();
    let seed_of = |args: &[&str], env: Option<&str>| {
        let dir = TempDir::new().unwrap();
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_preq"));
        cmd.args(args).arg("--out").arg(dir.path()).env_remove("PREQ_DEFAULT_SEED");
        if let Some(v) = env {
            cmd.env("PREQ_DEFAULT_SEED", v);
        }
        assert!(cmd.output().unwrap().status.success());
        report(dir.path())
    };
    assert_eq!(seed_of(&["verify", "--config", cfg], Some("17"))["seed"], 17);
    assert_eq!(seed_of(&["verify", "--config", cfg, "--seed", "5"], Some("17"))["seed"], 5);
    let unseeded = seed_of(&["verify", "--config", cfg], None);
    assert_eq!(unseeded["seed"], 0);
    assert_eq!(unseeded["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn brownian_paths_recover_linear_growth() {
    let (dir, out) = run_scenario("paths", "brownian.json");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = dir.path().join("paths_summary.csv");
    let b00 = column(&summary, "empirical_re_0_0");
    let b11 = column(&summary, "empirical_re_1_1");
    let bound = 5.0 * 3.0 / (1e5f64).sqrt();
    assert!((b00[1] - 3.0).abs() <= bound && (b11[1] - 1.0).abs() <= bound);
    let ode = column(&summary, "ode_re_0_0");
    assert!((ode[0] - 2.0).abs() < 1e-12 && (ode[1] - 3.0).abs() < 1e-12);
}

#[test]
fn noiseless_unitary_paths_conserve_norm() {
    let (dir, out) = run_scenario("paths", "unitary_paths.json");
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert!(r["checks"].as_array().unwrap().iter().any(|c| c["check"] == "norm-conservation" && c["pass"] == true));
}

#[test]
fn ou_paths_match_covariance_ode() {
    let (dir, out) = run_scenario("paths", "ornstein_uhlenbeck.json");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = dir.path().join("paths_summary.csv");
    let diffs = column(&summary, "max_abs_diff");
    let tols = column(&summary, "tolerance");
    assert_eq!(diffs.len(), 3);
    assert!(diffs.iter().zip(&tols).all(|(d, t)| d <= t));
}

#[test]
fn coefficient_dump_has_n4_rows() {
    let (dir, out) = run_scenario("coeffs", "amplitude_damping.json");
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("coeffs.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 16);
    assert_eq!(text.lines().next().unwrap(), "k,m,i,j,re,im");
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let cfg = scenario("bridge_random.json");
    let cfg = cfg.to_str().unwrap();
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    preq(&["verify", "--config", cfg, "--workers", "1"], a.path());
    preq(&["verify", "--config", cfg, "--workers", "4"], b.path());
    assert_eq!(
        fs::read(a.path().join("report.json")).unwrap(),
        fs::read(b.path().join("report.json")).unwrap()
    );
}
