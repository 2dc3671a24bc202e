use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const IDENTITY: &str = r#"
[covariance]
entries = [[1.0, 0.0], [0.0, 0.0],
           [0.0, 0.0], [1.0, 0.0]]

[detector]
threshold = 10.0

[run]
n_cycles = 1000
seed = 5
"#;

fn tsd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_with(dir: &TempDir, command: &str, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = write_config(dir.path(), &format!("{command}.toml"), config);
    let out = dir
        .path()
        .join(format!("out_{command}_{}", extra.join("_").replace('-', "")));
    let mut args = vec![
        command,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    (tsd(&args), out)
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn validate_writes_echo_with_defaults() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_with(&dir, "validate", IDENTITY, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let echo: Value = serde_json::from_str(&fs::read_to_string(out.join("config_echo.json")).unwrap()).unwrap();
    let fields: Vec<&str> = echo["defaults"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["field"].as_str().unwrap())
        .collect();
    assert!(fields.contains(&"detector.dt"));
    assert!(fields.contains(&"detector.t_max"));
    let s = summary(&out);
    assert_eq!(s["command"], "validate");
    assert_eq!(s["seed"], 5);
    assert_eq!(s["results"]["born_targets"], serde_json::json!([0.5, 0.5]));
    assert_eq!(s["defaults"], echo["defaults"]);
}

#[test]
fn non_psd_config_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let bad = IDENTITY
        .replace("[[1.0, 0.0], [0.0, 0.0],", "[[1.0, 0.0], [2.0, 0.0],")
        .replace("[0.0, 0.0], [1.0, 0.0]]", "[2.0, 0.0], [1.0, 0.0]]");
    let (o, _) = run_with(&dir, "validate", &bad, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("positive semidefinite"));
}

#[test]
fn malformed_toml_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run_with(&dir, "validate", "[covariance\nentries = 3", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn missing_list_for_sweep_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run_with(&dir, "sweep", IDENTITY, &[]);
    assert_eq!(o.status.code(), Some(2));
    let (o, _) = run_with(&dir, "brightness", IDENTITY, &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = tsd(&["born", "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn io_failures_exit_with_io_code() {
    let dir = TempDir::new().unwrap();
    let o = tsd(&["validate", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));

    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "not a directory").unwrap();
    let cfg = write_config(dir.path(), "c.toml", IDENTITY);
    let o = tsd(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn all_censored_run_exits_with_numeric_code() {
    let dir = TempDir::new().unwrap();
    let text = IDENTITY.replace("threshold = 10.0", "threshold = 10.0\ndt = 0.01\nt_max = 0.02");
    let (o, _) = run_with(&dir, "g2", &text, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_with_three_thresholds_writes_three_rows() {
    let dir = TempDir::new().unwrap();
    let text = IDENTITY.replace("seed = 5", "seed = 5\nsweep = [5.0, 10.0, 20.0]");
    let (o, out) = run_with(&dir, "sweep", &text, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[0],
        "E_d,P_1,P_2,P_12,g2,g2_ci_low,g2_ci_high,epsilon,g2_bound,censored_fraction,n_clicks,n_cycles"
    );
    assert!(lines[1].starts_with("5,"));
    assert!(lines[3].starts_with("20,"));
    let s = summary(&out);
    assert!(s["pass"]["rows_within_bound"].is_boolean());
    assert_eq!(s["results"]["pooled_g2_bounds"].as_array().unwrap().len(), 3);
    assert!(out.join("timings.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "g2.toml", IDENTITY);
    let mut outputs = Vec::new();
    for (k, workers) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let o = tsd(&[
            "g2",
            "-c",
            cfg.to_str().unwrap(),
            "-o",
            out.to_str().unwrap(),
            "-w",
            workers,
            "--events",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(out);
    }
    for name in ["g2.csv", "summary.json", "config_echo.json", "events.jsonl"] {
        let a = fs::read(outputs[0].join(name)).unwrap();
        let b = fs::read(outputs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn seed_override_changes_results_and_is_echoed() {
    let dir = TempDir::new().unwrap();
    let (_, a) = run_with(&dir, "born", IDENTITY, &[]);
    let (o, b) = run_with(&dir, "born", IDENTITY, &["--seed", "77"]);
    assert!(o.status.success());
    let (sa, sb) = (summary(&a), summary(&b));
    assert_eq!(sb["seed"], 77);
    assert!(sb["defaults"]
        .as_array()
        .unwrap()
        .iter()
        .any(|d| d["field"] == "run.seed"));
    assert_ne!(
        fs::read(a.join("born.csv")).unwrap(),
        fs::read(b.join("born.csv")).unwrap()
    );
    assert_eq!(sa["config"]["n_cycles"], 1000);
}

#[test]
fn born_event_log_has_one_line_per_cycle() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_with(&dir, "born", IDENTITY, &["--events"]);
    assert!(o.status.success());
    let log = fs::read_to_string(out.join("events.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1000);
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["cycle"], 0);
    let born = fs::read_to_string(out.join("born.csv")).unwrap();
    assert_eq!(born.lines().count(), 3);
}

#[test]
fn moments_table_has_three_rows_per_case() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m");
    let o = tsd(&["moments", "--seed", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("moments.csv")).unwrap();
    assert_eq!(table.lines().count(), 31);
    assert!(table.starts_with("case,dim,quantity,analytic,mc_estimate,std_err,z\n"));
    assert_eq!(summary(&out)["pass"]["moments_within_5_sigma"], true);
}

#[test]
fn brightness_table_has_scale_column() {
    let dir = TempDir::new().unwrap();
    let text = IDENTITY.replace("seed = 5", "seed = 5\nbrightness = [0.5, 1.0, 2.0]");
    let (o, out) = run_with(&dir, "brightness", &text, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("brightness.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.starts_with("scale,E_d,"));
}
