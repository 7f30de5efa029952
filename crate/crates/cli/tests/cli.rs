use std::path::Path;
use std::process::{Command, Output};

fn vardisc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vardisc"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) {
    let out = vardisc(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn pipeline_runs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "ibp", "--n", "60", "--alpha", "15", "--sigma", "0.3", "--c", "1", "--seed", "4", "--out", "m.txt"], d);
    ok(&["fit", "--matrix", "m.txt", "--lambda-init", "40", "--seed", "1", "--out", "p1.json"], d);
    ok(&["fit", "--matrix", "m.txt", "--lambda-init", "40", "--seed", "1", "--out", "p2.json"], d);
    let p1 = std::fs::read_to_string(d.join("p1.json")).unwrap();
    assert_eq!(p1, std::fs::read_to_string(d.join("p2.json")).unwrap());
    let v: serde_json::Value = serde_json::from_str(&p1).unwrap();
    assert!(v["alpha"].as_f64().unwrap() > 0.0);

    ok(&["predict", "--matrix", "m.txt", "--params", "p1.json", "--m", "20", "--lambda-init", "40", "--lambda-follow", "35", "--out", "pred.csv"], d);
    let csv = std::fs::read_to_string(d.join("pred.csv")).unwrap();
    assert!(csv.starts_with("method,m,total_mean,total_std,lo,hi,truth\n"));
    assert_eq!(csv.lines().count(), 22);
    assert!(d.join("pred.json").exists());

    ok(&["design", "--matrix", "m.txt", "--params", "p1.json", "--lambda-grid", "2,100,8", "--out", "d.json"], d);
    let des: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("d.json")).unwrap()).unwrap();
    assert_eq!(des["sweep"].as_array().unwrap().len(), 8);

    ok(&["evaluate", "--matrix", "m.txt", "--folds", "4", "--methods", "bb,jackknife:2,gt:log3", "--seed", "2", "--out", "ev.csv"], d);
    let ev = std::fs::read_to_string(d.join("ev.csv")).unwrap();
    // 3 methods × (M + 1) points with M = 60 - 15.
    assert_eq!(ev.lines().count(), 1 + 3 * 46);
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("ev.json")).unwrap()).unwrap();
    assert_eq!(side["seed"], 2);
}

#[test]
fn simulate_generators() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("f.txt"), "0.5\n0.1\n0.9\n").unwrap();
    ok(&["simulate", "beta", "--n", "10", "--bigk", "30", "--a", "0.5", "--b", "3", "--out", "b.txt"], d);
    ok(&["simulate", "powerlaw", "--n", "10", "--bigk", "30", "--exponent", "0.5", "--phi", "0.8", "--out", "p.txt"], d);
    ok(&["simulate", "freqs", "--n", "10", "--freq-file", "f.txt", "--phi", "0.5", "--seed", "9", "--out", "f1.txt"], d);
    ok(&["simulate", "freqs", "--n", "10", "--freq-file", "f.txt", "--phi", "0.5", "--seed", "9", "--out", "f2.txt"], d);
    assert_eq!(std::fs::read(d.join("f1.txt")).unwrap(), std::fs::read(d.join("f2.txt")).unwrap());
    let header = std::fs::read_to_string(d.join("b.txt")).unwrap();
    assert!(header.starts_with("10 30\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| vardisc(args, d).status.code();
    assert_eq!(code(&["simulate", "ibp", "--n", "5", "--out", "x.txt"]), Some(2));
    assert_eq!(code(&["fit", "--matrix", "missing.txt", "--out", "x.json"]), Some(2));
    assert_eq!(code(&["simulate", "powerlaw", "--n", "5", "--bigk", "3", "--exponent", "2.5", "--out", "x"]), Some(2));
    std::fs::write(d.join("m.txt"), "12 2\n0 0\n").unwrap();
    let out = vardisc(&["evaluate", "--matrix", "m.txt", "--methods", "unseenest", "--out", "e.csv"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unseenest"));
    assert_eq!(code(&["evaluate", "--matrix", "m.txt", "--folds", "5", "--out", "e.csv"]), Some(2));
    assert_eq!(code(&["bogus"]), Some(2));
}
