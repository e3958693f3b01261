//! End-to-end runs of the `fredinfo` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fredinfo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fredinfo"))
        .args(args)
        .env_remove("FREDINFO_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, nu: f64) -> std::path::PathBuf {
    let cfg = format!(
        r#"{{
  "model": {{"kind": "green", "K_max": 64}},
  "channel": {{
    "rho": {{"family": "geometric", "scale": 1.0, "ratio": 0.25}},
    "nu": {{"family": "constant", "value": {nu}}}
  }},
  "epsilon_grid": [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, "pow2:-8"],
  "trials": 200,
  "seed": 17
}}"#
    );
    let path = dir.join("config.json");
    fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn eigens_lists_green_spectrum() {
    let o = fredinfo(&["eigens", "--model", "green", "--k", "1..5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "k,lambda");
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("5,"));
}

#[test]
fn capacity_reports_both_bounds() {
    let o = fredinfo(&["capacity", "--model", "poisson", "--a", "0.5", "--b", "1.0", "--epsilon", "0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(row[1], 3.0);
    assert_eq!(row[2], 5.0);
    assert!((row[3] - 3.965784284662087).abs() < 1e-12);
    assert!((row[4] - 35.339273215260995).abs() < 1e-12);
}

#[test]
fn capacity_accepts_exponent_epsilon() {
    let o = fredinfo(&["capacity", "--model", "heat", "--d", "1", "--a", "2", "--b", "1", "--epsilon", "pow2:-1024"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("pow2:-1024,26,"), "{row}");
}

#[test]
fn table_has_three_rows() {
    let o = fredinfo(&["table"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn bad_input_exits_with_validation_status() {
    assert_eq!(fredinfo(&["eigens", "--model", "green", "--nope"]).status.code(), Some(2));
    assert_eq!(fredinfo(&["capacity", "--model", "green", "--epsilon", "-1"]).status.code(), Some(2));
    assert_eq!(fredinfo(&["capacity", "--model", "green", "--epsilon", "pow2:x"]).status.code(), Some(2));
    assert_eq!(fredinfo(&["frobnicate"]).status.code(), Some(2));
    let o = fredinfo(&["eigens", "--model", "tabulated", "--values", "0.5,0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn numeric_failure_exits_with_status_three() {
    // k₀ for green at 2^-200 exceeds the representable search range.
    let o = fredinfo(&["capacity", "--model", "green", "--epsilon", "pow2:-200"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn prob_info_reports_worked_channel() {
    let o = fredinfo(&[
        "prob-info", "--model", "poisson", "--a", "0.5", "--b", "1", "--k-max", "64",
        "--rho", "geometric:1,0.5", "--nu", "constant:1", "--epsilon", "0.0625",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["k_I"], 2);
    assert_eq!(v["k_alpha"], 1);
    assert!((v["mse"].as_f64().unwrap() - 19.0 / 192.0).abs() < 1e-15);
    assert_eq!(v["components"].as_array().unwrap().len(), 64);
}

#[test]
fn prob_info_extremal_beta() {
    let o = fredinfo(&["prob-info", "--model", "green", "--epsilon", "1e-3", "--extremal", "beta"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["k0"], 10);
    assert!((v["approx_nats"].as_f64().unwrap() - 10.0 * 1000f64.ln()).abs() < 1e-6);
}

#[test]
fn truncate_reads_data_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("g.json");
    let reference = dir.path().join("f.json");
    // poisson(0.5, 1), K_max = 3: ḡ_k = λ_k for k = -3..3.
    fs::write(&data, "[0.125, 0.25, 0.5, 1.0, 0.5, 0.25, 0.125]").unwrap();
    fs::write(&reference, "[1, 1, 1, 1, 1, 1, 1]").unwrap();
    let o = fredinfo(&[
        "truncate", "--model", "poisson", "--a", "0.5", "--b", "1", "--k-max", "3", "--epsilon", "0.2",
        "--data", data.to_str().unwrap(), "--reference", reference.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["k0"], 2);
    assert_eq!(v["retained_modes"], 5);
    let entries: Vec<f64> = serde_json::from_value(v["f_star"]["entries"].clone()).unwrap();
    assert_eq!(entries, vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
    assert!((v["distance_x"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn simulate_writes_csv_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0.1);
    let out = dir.path().join("run.csv");
    let o = fredinfo(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("epsilon,k0,k_I,k_alpha,"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 17);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);

    // The emitted config reproduces the run byte for byte.
    let emitted = dir.path().join("run.csv.config.json");
    let again = dir.path().join("again.csv");
    let o = fredinfo(&["simulate", "--config", emitted.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn seed_environment_variable_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0.1);
    let run = |seed: Option<&str>, name: &str| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_fredinfo"));
        cmd.args(["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        match seed {
            Some(s) => cmd.env("FREDINFO_SEED", s),
            None => cmd.env_remove("FREDINFO_SEED"),
        };
        assert!(cmd.output().unwrap().status.success());
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("{name}.meta.json"))).unwrap())
                .unwrap();
        (fs::read_to_string(&out).unwrap(), meta["seed"].as_u64().unwrap())
    };
    let (base, s0) = run(None, "a.csv");
    let (other, s1) = run(Some("99"), "b.csv");
    assert_eq!(s0, 17);
    assert_eq!(s1, 99);
    assert_ne!(base, other);
}

#[test]
fn failed_sweep_assertion_exits_with_status_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1.0);
    let o = fredinfo(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    // The run still completes and prints every row.
    assert_eq!(stdout(&o).lines().count(), 9);
    assert!(String::from_utf8_lossy(&o.stderr).contains("assertion failed"));
}
