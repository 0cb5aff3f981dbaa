use std::path::Path;
use std::process::{Command, Output};

use canard_ctl::output::parse_csv;
use serde_json::Value;

fn ctl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_canard-ctl")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn metrics(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn quick_run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "q.json", r#"{"experiment": "k1-vdp", "name": "chart"}"#);
    let o = ctl(&["run", &cfg, "--out", "out"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("out/chart");

    let csv = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x,y,u\n"));
    assert!(!csv.contains('\r'));
    let second = csv.lines().nth(1).unwrap();
    for field in second.split(',') {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{field}");
    }
    let (t, s, _) = parse_csv(&csv).unwrap();
    assert!(t.len() > 10 && t.len() == s.len());

    let m = metrics(&dir.join("metrics.json"));
    assert_eq!(m["config"]["experiment"], "k1-vdp");
    assert_eq!(m["config"]["params"]["eps"], 0.008);
    assert!(m["terminal"].is_object());

    let svg = std::fs::read_to_string(dir.join("phase.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.contains("version=\"1.1\""));
}

#[test]
fn csv_round_trip_reproduces_metrics_terminal_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "f.json", r#"{"experiment": "fold-fast", "name": "f", "t_end": 20}"#);
    assert_eq!(code(&ctl(&["run", &cfg, "--out", "o"], tmp.path())), 0);
    let dir = tmp.path().join("o/f");
    let (t, s, u) = parse_csv(&std::fs::read_to_string(dir.join("trajectory.csv")).unwrap()).unwrap();
    let m = metrics(&dir.join("metrics.json"));
    let last = s.last().unwrap();
    assert_eq!(m["terminal"]["x"].as_f64().unwrap().to_bits(), last[0].to_bits());
    assert_eq!(m["terminal"]["y"].as_f64().unwrap().to_bits(), last[1].to_bits());
    assert_eq!(m["terminal"]["t"].as_f64().unwrap(), *t.last().unwrap());
    assert_eq!(m["terminal"]["u"].as_f64().unwrap().to_bits(), u.last().unwrap().to_bits());
}

#[test]
fn set_override_wins_over_file_and_is_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "f.json", r#"{"experiment": "fold-fast", "name": "f", "t_end": 5, "params": {"c1": 3}}"#);
    let o = ctl(&["run", &cfg, "--out", "o", "--set", "c1=2.5", "--t-end", "4"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = metrics(&tmp.path().join("o/f/metrics.json"));
    assert_eq!(m["config"]["params"]["c1"], 2.5);
    assert_eq!(m["config"]["t_end"], 4.0);
}

#[test]
fn raw_level_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "h.json", r#"{"experiment": "fold-fast", "params": {"h": 0.1}}"#);
    let o = ctl(&["run", &cfg], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("h0"));
    assert_eq!(code(&ctl(&["run", &cfg.replace("h.json", "missing.json")], tmp.path())), 2);
}

#[test]
fn unknown_names_are_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.json", r#"{"experiment": "fold-medium"}"#);
    let b = write(tmp.path(), "b.json", r#"{"experiment": "fold-fast", "params": {"gamma": 1}}"#);
    let c = write(tmp.path(), "c.json", r#"{"experiment": "fold-fast", "colour": "red"}"#);
    for f in [a, b, c] {
        assert_eq!(code(&ctl(&["run", &f], tmp.path())), 2, "{f}");
    }
    let f = write(tmp.path(), "d.json", r#"{"experiment": "fold-fast"}"#);
    assert_eq!(code(&ctl(&["run", &f, "--set", "eps=-1"], tmp.path())), 2);
    assert_eq!(code(&ctl(&["run", &f, "--jobs", "0"], tmp.path())), 2);
}

#[test]
fn duplicate_names_in_a_batch_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "dup.json", r#"[{"experiment": "k1-vdp", "name": "x"}, {"experiment": "fold-fast", "name": "x"}]"#);
    assert_eq!(code(&ctl(&["run", &cfg, "--out", "o"], tmp.path())), 2);
    assert!(!tmp.path().join("o/x").exists());
}

#[test]
fn unwritable_output_is_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("plain"), "").unwrap();
    let cfg = write(tmp.path(), "q.json", r#"{"experiment": "k1-vdp"}"#);
    assert_eq!(code(&ctl(&["run", &cfg, "--out", "plain/sub"], tmp.path())), 2);
}

#[test]
fn integration_fault_is_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    // a huge gain makes the problem so stiff that the step size underflows
    let cfg = write(tmp.path(), "s.json", r#"{"experiment": "fold-fast", "name": "s", "params": {"c1": 1e12}}"#);
    let o = ctl(&["run", &cfg, "--out", "o"], tmp.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let m = metrics(&tmp.path().join("o/s/metrics.json"));
    assert_eq!(m["exit_code"], 3);
}

#[test]
fn pattern_deviation_is_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    // at eps = 0.3 the requested large loops collapse to a small one
    let o = ctl(&["mmo", "--pattern", "2L:0.75:0.01", "--eps", "0.3", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("achieved S") && err.contains("LL"), "{err}");
}

#[test]
fn mmo_subcommand_realizes_pattern() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ctl(&["mmo", "--pattern", "1L:0.75:0.01,2S:1.25:-0.01", "--eps", "0.01", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = metrics(&tmp.path().join("o/mmo/metrics.json"));
    assert_eq!(m["labels"], "LSS");
    assert_eq!(m["switches"].as_array().unwrap().len(), 3);
    let svg = std::fs::read_to_string(tmp.path().join("o/mmo/phase.svg")).unwrap();
    assert_eq!(svg.matches("fill-opacity").count(), 2);
}

#[test]
fn svg_is_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"experiment": "vdp-canard", "name": "c", "t_end": 300}"#);
    for out in ["a", "b"] {
        assert_eq!(code(&ctl(&["run", &cfg, "--out", out], tmp.path())), 0);
    }
    for file in ["phase.svg", "trajectory.csv", "metrics.json"] {
        let a = std::fs::read(tmp.path().join("a/c").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b/c").join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
}

#[test]
fn batch_writes_distinct_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "batch.json",
        r#"[{"experiment": "k1-vdp", "name": "one"}, {"experiment": "k2-hot", "name": "two", "t_end": 20}, {"experiment": "fold-slow", "name": "three", "t_end": 10}]"#,
    );
    let o = ctl(&["run", &cfg, "--out", "o", "--jobs", "3"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for (name, exp) in [("one", "k1-vdp"), ("two", "k2-hot"), ("three", "fold-slow")] {
        let m = metrics(&tmp.path().join("o").join(name).join("metrics.json"));
        assert_eq!(m["config"]["experiment"], exp);
    }
}

#[test]
fn list_names_every_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ctl(&["list"], tmp.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    for e in ["fold-fast", "fold-fast-hot", "fold-slow", "k2", "k2-hot", "k1-vdp", "vdp-canard", "vdp-mmo", "verify"] {
        assert!(out.lines().any(|l| l == e), "{e}");
    }
}

#[test]
fn verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ctl(&["verify"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 9);
}
