//! End-to-end tests of the `qsd` binary: exit codes, report envelopes, and
//! golden values on small instances.

use std::process::{Command, Output};

fn qsd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON report")
}

const MM1: &str = r#"{"model":"killed_mm1","p":1,"q":4}"#;

#[test]
fn decay_reports_extrapolated_lambda() {
    let out = qsd(&["decay", "--model", MM1, "--trunc", "200,400"]);
    let v = json_of(&out);
    assert_eq!(v["command"], "decay");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    let extrapolated = v["data"]["extrapolated"].as_f64().unwrap();
    assert!((extrapolated - 1.0).abs() < 1e-5, "extrapolated {extrapolated}");
    assert_eq!(v["data"]["analytic"], 1.0);
    // the resolved configuration is echoed back
    assert_eq!(v["config"]["trunc"][0], 200);
}

#[test]
fn decay_csv_has_one_row_per_level() {
    let out = qsd(&["decay", "--model", MM1, "--trunc", "50,100", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,lambda");
    assert_eq!(lines.len(), 3);
}

#[test]
fn lcd_at_time_zero_is_a_point_mass() {
    let out = qsd(&["lcd", "--model", MM1, "--trunc", "40", "--i", "3", "--t", "0"]);
    let v = json_of(&out);
    let probs = v["data"]["conditionals"][0]["probs"].as_array().unwrap();
    assert_eq!(probs[2], 1.0);
}

#[test]
fn validate_reports_clean_diagnostics() {
    let out = qsd(&["validate", "--model", MM1, "--trunc", "100"]);
    let v = json_of(&out);
    let d = &v["data"]["diagnostics"];
    assert_eq!(d["conservative"], true);
    assert_eq!(d["stable"], true);
    assert_eq!(d["irreducible_c"], true);
    assert_eq!(d["boundary_leak"], 1.0);
}

#[test]
fn kernel_row_slice_is_stochastic() {
    let out = qsd(&["kernel", "--model", MM1, "--trunc", "30", "--t", "0.5", "--i", "1"]);
    let v = json_of(&out);
    let entries = v["data"]["entries"].as_array().unwrap();
    let mass: f64 = entries.iter().map(|e| e["p"].as_f64().unwrap()).sum();
    let absorbed = v["data"]["absorption"][0]["p0"].as_f64().unwrap();
    assert!(mass + absorbed <= 1.0 + 1e-9);
    assert!(absorbed > 0.5, "most mass absorbs quickly from state 1");
}

#[test]
fn kappa_survival_series_via_state_zero() {
    let out = qsd(&[
        "kappa", "--model", MM1, "--trunc", "400", "--i", "1", "--j", "0",
        "--t-grid", "40:120:12:log",
    ]);
    let v = json_of(&out);
    let kappa = v["data"]["estimate"]["kappa"].as_f64().unwrap();
    assert!((kappa - 1.5).abs() < 0.1, "kappa {kappa}");
    assert_eq!(v["data"]["series"]["target"]["kind"], "survival");
}

#[test]
fn simulate_is_reproducible_and_carries_seed() {
    let args = [
        "simulate", "--model", MM1, "--trunc", "40", "--i", "1", "--t", "1", "--n", "2000",
        "--seed", "7",
    ];
    let a = json_of(&qsd(&args));
    let b = json_of(&qsd(&args));
    assert_eq!(a["data"], b["data"]);
    assert_eq!(a["data"]["seed"], 7);
    assert_eq!(a["data"]["survival"]["n_total"], 2000);
    assert!(a["data"]["conditional"]["rng"].as_str().unwrap().contains("chacha12"));
}

#[test]
fn config_file_equals_flags() {
    let dir = std::env::temp_dir().join(format!("qsd-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{"model":{"model":"killed_mm1","p":1.0,"q":4.0},"trunc":[50,100]}"#,
    )
    .unwrap();
    let from_config = json_of(&qsd(&["decay", "--config", path.to_str().unwrap()]));
    let from_flags = json_of(&qsd(&["decay", "--model", MM1, "--trunc", "50,100"]));
    assert_eq!(from_config["data"], from_flags["data"]);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_random_walk_suite_passes() {
    let out = qsd(&["verify", "--suite", "rw"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS [ 9]"), "got: {text}");
}

#[test]
fn usage_errors_exit_with_two() {
    // unknown flag (clap)
    let out = qsd(&["decay", "--model", MM1, "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    // bad model JSON (ours)
    let out = qsd(&["decay", "--model", "{\"model\":\"nope\"}", "--trunc", "10,20"]);
    assert_eq!(out.status.code(), Some(2));
    // missing truncation level
    let out = qsd(&["validate", "--model", MM1]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn computation_failures_exit_with_one() {
    // survival of the random walk is undefined: unsupported model
    let out = qsd(&[
        "lcd", "--model", r#"{"model":"random_walk_z","p":1,"q":1}"#, "--trunc", "20",
        "--i", "0", "--t", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("absorbing"), "stderr: {err}");
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let dir = std::env::temp_dir().join(format!("qsd-cli-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let out = qsd(&[
        "validate", "--model", MM1, "--trunc", "20", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["command"], "validate");
    std::fs::remove_dir_all(&dir).ok();
}
