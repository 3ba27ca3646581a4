use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stegcmdp"))
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const ATTRACTED: &str = r#"{"p0":0.7,"p1":0.9,"init0":0.8,"gamma":0.9,"b":0.3,"seed":11}"#;

#[test]
fn solve_prints_record() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", ATTRACTED);
    let rec = stdout_json(&run(&["solve", "--config", cfg.to_str().unwrap()]));
    assert_eq!(rec["regime"], "R2");
    assert_eq!(rec["method"], "CLOSED_FORM");
    assert_eq!(rec["shape"], "ATTRACTED");
    for key in ["a0", "a1", "d0", "d1", "reward_bits", "cost"] {
        assert!(rec[key].is_f64(), "{key}");
    }
    let th = &rec["thresholds"];
    assert!((th["b_low"].as_f64().unwrap() - 0.116).abs() < 1e-3);
    assert!((th["b_high"].as_f64().unwrap() - 0.588).abs() < 1e-3);
}

#[test]
fn config_errors_exit_with_usage_status() {
    let dir = TempDir::new().unwrap();
    let typo = write_config(dir.path(), "typo.json", r#"{"p0":0.7,"p1":0.9,"init0":0.8,"gama":0.9,"b":0.1}"#);
    let out = run(&["solve", "--config", typo.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gama"));

    let negative = write_config(dir.path(), "neg.json", r#"{"p0":0.7,"p1":0.9,"init0":0.8,"gamma":0.9,"b":-1}"#);
    assert_eq!(run(&["solve", "--config", negative.to_str().unwrap()]).status.code(), Some(2));

    let missing = dir.path().join("absent.json");
    assert_eq!(run(&["solve", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["solve"]).status.code(), Some(2));
}

#[test]
fn sweep_csv_has_thresholds_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"p0":0.7,"p1":0.9,"init0":0.8,"gamma":0.9,"b_min":0,"b_max":0.7,"steps":15}"#,
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", path.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());

    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("b,a0,a1,d0,d1,reward_bits,cost,regime"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    assert_eq!(rows.len(), 17);
    let col = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();
    let budgets: Vec<f64> = rows.iter().map(|r| col(r, 0)).collect();
    assert!(budgets.windows(2).all(|w| w[0] < w[1]));
    let rewards: Vec<f64> = rows.iter().map(|r| col(r, 5)).collect();
    assert!(rewards.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    let regimes: Vec<&str> = rows.iter().map(|r| r[7].as_str()).collect();
    assert_eq!(regimes.first(), Some(&"R1"));
    assert_eq!(regimes.last(), Some(&"R3"));
    assert!(regimes.contains(&"R2"));
    for r in rows.iter().filter(|r| r[7] == "R3") {
        assert_eq!((col(r, 1), col(r, 2)), (0.5, 0.5));
    }
}

#[test]
fn verify_passes_on_solved_policy_and_fails_without_certificate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", ATTRACTED);
    let report = stdout_json(&run(&["verify", "--config", cfg.to_str().unwrap()]));
    assert_eq!(report["passed"], true);
    assert!(report["lambda"].as_f64().unwrap() > 0.0);

    let sticky = write_config(dir.path(), "s.json", r#"{"p0":0.8,"p1":0.3,"init0":0.5,"gamma":0.9,"b":0.1}"#);
    let out = run(&["verify", "--config", sticky.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn oracle_agrees_with_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", ATTRACTED);
    let rec = stdout_json(&run(&["oracle", "--config", cfg.to_str().unwrap(), "--grid-step", "0.01"]));
    let gap = rec["reward_gap"].as_f64().unwrap();
    assert!((-1e-9..=5e-3).contains(&gap), "gap {gap}");
}

#[test]
fn simulate_matches_analytic_values() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", ATTRACTED);
    let args = ["simulate", "--config", cfg.to_str().unwrap(), "--rollouts", "4000"];
    let first = run(&args);
    let rec = stdout_json(&first);
    for key in ["reward_bits", "cost", "d0"] {
        let z = rec["estimates"][key]["z_score"].as_f64().unwrap();
        assert!(z.abs() < 5.0, "{key}: z = {z}");
        assert_eq!(rec["estimates"][key]["seed"], 11);
    }
    assert_eq!(first.stdout, run(&args).stdout);
}

#[test]
fn embed_extract_roundtrip_through_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", ATTRACTED);
    let message = dir.path().join("msg.bin");
    let payload: Vec<u8> = (0u8..=255).collect();
    fs::write(&message, &payload).unwrap();
    let tokens = dir.path().join("tokens.txt");
    let recovered = dir.path().join("out.bin");

    let cfg_s = cfg.to_str().unwrap();
    let out = run(&["embed", "--config", cfg_s, "--message", message.to_str().unwrap(), "--out", tokens.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&tokens).unwrap();
    assert!(text.lines().all(|l| l == "0" || l == "1"));

    let out = run(&["extract", "--config", cfg_s, "--tokens", tokens.to_str().unwrap(), "--out", recovered.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&recovered).unwrap(), payload);

    // A different budget gives a different provider, caught by the checksum.
    let other = write_config(dir.path(), "o.json", r#"{"p0":0.7,"p1":0.9,"init0":0.8,"gamma":0.9,"b":0.05}"#);
    let out = run(&["extract", "--config", other.to_str().unwrap(), "--tokens", tokens.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn embed_with_bit_count_and_short_token_budget() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", ATTRACTED);
    let cfg_s = cfg.to_str().unwrap();
    let message = dir.path().join("msg.bin");
    fs::write(&message, [0b1011_0110, 0xff]).unwrap();
    let msg_s = message.to_str().unwrap();

    let out = run(&["embed", "--config", cfg_s, "--message", msg_s, "--bits", "11", "--seed", "3"]);
    assert!(out.status.success());
    let tokens = dir.path().join("t.txt");
    fs::write(&tokens, &out.stdout).unwrap();
    let out = run(&["extract", "--config", cfg_s, "--tokens", tokens.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(out.stdout, vec![0b1011_0110, 0b1110_0000]);

    let out = run(&["embed", "--config", cfg_s, "--message", msg_s, "--n-tokens", "20"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 20);
    fs::write(&tokens, &out.stdout).unwrap();
    let out = run(&["extract", "--config", cfg_s, "--tokens", tokens.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
