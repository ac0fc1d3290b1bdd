use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parity-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report on stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn verify_small_run_passes_with_envelope() {
    let out = lab(&["verify-parity", "--seed", "5", "--samples", "30", "--lengths", "64"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["command"], "verify-parity");
    assert_eq!(v["seed"], 5);
    assert_eq!(v["precision"], "ext:106");
    assert_eq!(v["pass"], true);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v["report"]["params"]["n_min"], 8);
    assert!(v["report"]["margins"]["min_gap_over_n6"].as_f64().unwrap() > 0.0);
    assert_eq!(v["report"]["total_mismatches"], 0);
}

#[test]
fn large_alpha_fails_with_counterexample() {
    let out = lab(&["verify-parity", "--alpha", "0.9", "--samples", "0", "--format", "table"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().find(|l| l.contains("expected")).expect("counterexample listed");
    let input = line.split_whitespace().next().unwrap();
    assert!(input.chars().all(|c| c == '0' || c == '1'));
    assert!(stderr(&out).contains("counterexample"));
}

#[test]
fn short_lengths_are_out_of_range() {
    let out = lab(&["verify-parity", "--seed", "1", "--samples", "10", "--lengths", "4,16"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let lengths = v["report"]["lengths"].as_array().unwrap();
    let four = lengths.iter().find(|l| l["n"] == 4).unwrap();
    assert_eq!(four["checked"], 0);
    assert!(four["note"].as_str().unwrap().contains("out of certified range"));
}

#[test]
fn sampling_needs_a_seed() {
    let out = lab(&["verify-parity", "--lengths", "64"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--seed"));
    assert_eq!(lab(&["sensitivity"]).status.code(), Some(2));
}

#[test]
fn precision_errors_are_usage_errors() {
    let out = lab(&["gap-scan", "--precision", "ext:9000"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lemma_guards() {
    let out = lab(&["lemmas", "--n-max", "8"]);
    assert!(stderr(&out).contains("insufficient asymptotic range"));
    let out = lab(&["lemmas", "--exponents", "3", "--order", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("[5, 100]"));
}

#[test]
fn calibration_failures() {
    let out = lab(&["calibrate", "--alpha", "0.9", "--n-max", "128"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("feasible"), "{err}");
    assert!(err.contains("0.9"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    std::fs::write(&cfg, r#"{"alphas": []}"#).unwrap();
    let out = lab(&["calibrate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("empty"));
}

#[test]
fn calibration_report_feeds_verification() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("cal.json");
    let out = lab(&["calibrate", "--alpha", "0.5", "--c", "0.26", "--n-max", "128", "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = lab(&[
        "verify-parity",
        "--calibration",
        report.to_str().unwrap(),
        "--seed",
        "2",
        "--samples",
        "20",
        "--lengths",
        "64",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["report"]["params"]["alpha"], 0.5);
    assert_eq!(v["report"]["params"]["c"], 0.26);
    assert_eq!(v["report"]["params"]["m"], 8);
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let path = dir.join(name);
    let mut all: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    all.extend(["--out", &p]);
    let out = lab(&all);
    assert!(out.status.code().is_some_and(|c| c < 2), "{}", stderr(&out));
    std::fs::read(&path).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gap-scan", "--n-max", "40", "--precision", "double"];
    let a = run_to(dir.path(), "a.json", &args);
    let b = run_to(dir.path(), "b.json", &args);
    assert_eq!(a, b);
    let args = ["verify-parity", "--seed", "9", "--samples", "25", "--lengths", "32", "--format", "table"];
    assert_eq!(run_to(dir.path(), "c.txt", &args), run_to(dir.path(), "d.txt", &args));
    // no stray temporary files are left behind
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| !n.ends_with(".tmp")), "{names:?}");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"n_max": 24, "precision": "double", "alpha": 0.5}"#).unwrap();
    let out = lab(&["gap-scan", "--config", cfg.to_str().unwrap(), "--alpha", "0.6"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["config"]["params"]["alpha"], 0.6);
    assert_eq!(v["config"]["n_max"], 24);
    assert_eq!(v["precision"], "double");
}
