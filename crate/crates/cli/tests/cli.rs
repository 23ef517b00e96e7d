use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn roughfrob(args: &[&str]) -> (i32, Value, Output) {
    let out = Command::new(env!("CARGO_BIN_EXE_roughfrob"))
        .args(args)
        .env("ROUGHFROB_THREADS", "1")
        .output()
        .expect("binary runs");
    let record: Value = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap_or(-1), record, out)
}

#[test]
fn integrate_example() {
    let (code, r, _) = roughfrob(&["integrate", "--f", "poly:t", "--g", "poly:t2", "--a", "0", "--b", "1", "--level", "14"]);
    assert_eq!(code, 0);
    let v = r["result"]["value"][0].as_f64().unwrap();
    assert!((v - 0.6666667).abs() < 1e-7, "{v}");
    assert_eq!(r["status"], "pass");
}

#[test]
fn rotational_jet_check_fails_with_code_2() {
    let (code, r, _) = roughfrob(&["check-jet", "--v", "rotational", "--g", "identity2d"]);
    assert_eq!(code, 2);
    assert_eq!(r["status"], "fail");
    assert!((r["result"]["final_ratio"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn errors_are_json_records() {
    let (code, r, _) = roughfrob(&["integrate", "--f", "poly:t", "--g", "nonsense:3"]);
    assert_eq!(code, 4);
    assert_eq!(r["status"], "error");
    assert_eq!(r["error"]["kind"], "config");

    let (code, r, _) = roughfrob(&["solve-implicit", "--preset", "implicit-degenerate"]);
    assert_eq!(code, 2);
    assert_eq!(r["error"]["kind"], "degeneracy");
}

#[test]
fn usage_errors_exit_4_not_2() {
    let (code, r, _) = roughfrob(&["integrate", "--no-such-flag"]);
    assert_eq!(code, 4);
    assert_eq!(r["error"]["kind"], "usage");
    let (code, _, out) = roughfrob(&["--help"]);
    assert_eq!(code, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("solve-pfaff"));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_roughfrob"))
        .args(["integrate", "--f", "poly:t", "--g", "poly:t2"])
        .env("ROUGHFROB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn preset_and_command_must_agree() {
    let (code, r, _) = roughfrob(&["integrate", "--preset", "exp2d"]);
    assert_eq!(code, 4);
    assert!(r["error"]["message"].as_str().unwrap().contains("solve-pfaff"));
}

#[test]
fn config_file_overrides_preset_and_flags_override_both() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "preset = \"young-oracle\"\n[numeric]\nlevel = 6\n").unwrap();
    let p = path.to_str().unwrap();
    let (_, r, _) = roughfrob(&["integrate", "--config", p]);
    assert_eq!(r["config"]["numeric"]["level"], 6);
    assert_eq!(r["config"]["signals"]["g"], "poly:t2");
    let (_, r, _) = roughfrob(&["integrate", "--config", p, "--level", "9"]);
    assert_eq!(r["config"]["numeric"]["level"], 9);
}

#[test]
fn converge_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, r, _) = roughfrob(&["converge", "--preset", "young-order", "--out", out]);
    assert_eq!(code, 0);
    assert_eq!(r["artifacts"][0], "converge.csv");
    let csv = fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("level,error,order"));
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|t| t.parse().unwrap()).collect();
    assert!((last[2] - 2.0).abs() < 1e-6, "{csv}");
    assert!(dir.path().join("result.json").exists());
}

#[test]
fn converge_needs_three_levels() {
    let (code, r, _) = roughfrob(&["converge", "--preset", "young-order", "--levels", "4,5"]);
    assert_eq!(code, 4);
    assert_eq!(r["error"]["kind"], "config");
}

#[test]
fn gen_signal_writes_grid_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, _) = roughfrob(&["gen-signal", "--g", "weierstrass:0.7:8:3", "--level", "8", "--out", out]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(dir.path().join("signal.csv")).unwrap();
    assert!(text.lines().count() > 257);
}

#[test]
fn seed_flag_changes_random_signals_only() {
    let base = ["gen-signal", "--g", "weierstrass:0.7:8:3", "--level", "6"];
    let (_, a, _) = roughfrob(&base);
    let (_, b, _) = roughfrob(&[&base[..], &["--seed", "1"]].concat());
    let (_, c, _) = roughfrob(&[&base[..], &["--seed", "0"]].concat());
    assert_ne!(a["result"], b["result"]);
    assert_eq!(a["result"], c["result"]);
}

#[test]
fn diagonal_example() {
    let (code, r, _) = roughfrob(&["solve-pfaff", "--mode", "diagonal", "--preset", "exp2d", "--level", "8"]);
    assert_eq!(code, 0);
    let v = r["result"]["theta_at"]["value"][0].as_f64().unwrap();
    assert!((v - 7.389056).abs() < 1e-3, "{v}");
}
