use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn he() -> Command {
    Command::new(env!("CARGO_BIN_EXE_he"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("he-cli-test-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    he().args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn mna_example_reports_minus_eight() {
    let out = scratch("mna");
    let o = run(&["mna"], &configs().join("mna_o1_om1.json"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["results"]["mna"], "-8");
    assert_eq!(r["results"]["jna"], "4");
    assert_eq!(r["command"], "mna");
    assert!(out.join("timing.json").exists());
}

#[test]
fn bergman_on_trivial_bundle_writes_a_small_deviation() {
    let dir = scratch("bergman");
    let cfg = write_config(&dir, r#"{"bundle": [0], "k": 5, "quadrature": {"n_colat": 32, "n_angle": 32}}"#);
    let o = run(&["bergman"], &cfg, &dir.join("out"));
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("out/bergman.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "5");
    assert!(row[1].parse::<f64>().unwrap() < 1e-8, "{csv}");
}

#[test]
fn failed_audit_exits_with_two() {
    let dir = scratch("fail");
    let cfg = write_config(
        &dir,
        r#"{"bundle": [1, 0], "k": 4, "metric": {"kind": "fubini_study", "level": 3, "spread": 0.5},
            "bergman": {"k_list": [4], "tolerance": 1e-12}}"#,
    );
    let o = run(&["bergman"], &cfg, &dir.join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(report(&dir.join("out"))["pass"], false);
}

#[test]
fn schema_errors_exit_with_one_and_name_the_field() {
    let dir = scratch("schema");
    let cfg = write_config(&dir, r#"{"k": 2, "colour": "blue"}"#);
    let o = run(&["mna"], &cfg, &dir.join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("$.bundle") && err.contains("$.colour"), "{err}");
}

#[test]
fn low_level_error_cites_the_minimum() {
    let dir = scratch("regularity");
    let cfg = write_config(&dir, r#"{"bundle": [3, -2], "k": 1}"#);
    let o = run(&["mna"], &cfg, &dir.join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("the minimum is 2"));
}

#[test]
fn reports_are_byte_identical_for_the_same_seed() {
    let dir = scratch("determinism");
    let cfg = write_config(
        &dir,
        r#"{"bundle": [3], "k": 3, "quadrature": {"n_colat": 12, "n_angle": 12},
            "metric": {"kind": "fubini_study", "level": 3, "spread": 0.3},
            "delta_audit": {"samples": 4}}"#,
    );
    let a = run(&["audit-deltabound", "--seed", "5"], &cfg, &dir.join("a"));
    let b = run(&["audit-deltabound", "--seed", "5", "--threads", "1"], &cfg, &dir.join("b"));
    let c = run(&["audit-deltabound", "--seed", "6"], &cfg, &dir.join("c"));
    for o in [&a, &b, &c] {
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &str| std::fs::read(dir.join(d).join("report.json")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = scratch("env");
    let cfg = write_config(&dir, r#"{"bundle": [1, -1], "k": 1, "zeta": {"summand_weights": ["1", "-3"]}}"#);
    let o = he()
        .args(["mna", "--config"])
        .arg(&cfg)
        .env("HE_OUTPUT_DIR", dir.join("from-env"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.join("from-env/report.json").exists());
}

#[test]
fn self_test_passes() {
    let o = he().arg("--self-test").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn solve_on_unstable_bundle_reports_a_destabilizer() {
    let out = scratch("solve");
    let o = run(&["solve"], &configs().join("solve_o1_om1.json"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["results"]["status"], "diverging");
    let level = &r["results"]["destabilizer"]["destabilizing_level"];
    assert_eq!(level["rank"], 1);
    assert_eq!(level["slope"], "1");
    assert!(r["results"]["final_mdon"].as_f64().unwrap() < -1e3);
    assert!(out.join("solve_history.csv").exists());
}
