use std::path::Path;
use std::process::{Command, Output};

fn dfm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfm")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = dfm(&["train", "--seed", "3", "--out-dir", path(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "predictions.csv", "model.kv", "probopt_trace.jsonl"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let report = std::fs::read_to_string(run.join("report.json")).unwrap();
    assert!(report.contains("\"seed\": 3"));

    let ev = dir.path().join("eval");
    let out = dfm(&["eval", "--model", path(&run.join("model.kv")), "--out-dir", path(&ev)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = std::fs::read_to_string(ev.join("predictions.csv")).unwrap().lines().count();
    assert_eq!(lines, 292);
}

#[test]
fn ablation_switches() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("plain");
    let out = dfm(&["train", "--no-rbm", "--no-prob", "--out-dir", path(&run)]);
    assert!(out.status.success());
    let report = std::fs::read_to_string(run.join("report.json")).unwrap();
    assert!(report.contains("\"use_rbm\": false") && report.contains("\"use_prob_rules\": false"));
    assert!(!run.join("probopt_trace.jsonl").exists());

    let grid = dir.path().join("grid");
    let out = dfm(&["ablate", "--seeds", "0,1", "--norm-scope", "all", "--out-dir", path(&grid)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("median over 2 seeds"));
    assert!(grid.join("ablation.json").exists());
}

#[test]
fn bench_prints_published_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfm(&["bench", "gas-furnace", "--seeds", "0", "--out-dir", path(dir.path())]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("19.3") && text.contains("26.2"));
}

#[test]
fn delay_search_writes_trials() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfm(&["delays-search", "--trials", "3", "--seed", "2", "--out-dir", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("delays.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("x");

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[cluster]\nalpha = 2.0\n").unwrap();
    let out = dfm(&["train", "--config", path(&cfg), "--out-dir", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));

    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "u,y\n1,2\n2,oops\n").unwrap();
    let out = dfm(&["train", "--data", path(&csv), "--out-dir", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));

    let out = dfm(&["train", "--data", path(&dir.path().join("absent.csv")), "--out-dir", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(3));

    // A model whose weights are not finite fails the numerical checks.
    let run = dir.path().join("run");
    assert!(dfm(&["train", "--no-rbm", "--out-dir", path(&run)]).status.success());
    let model = std::fs::read_to_string(run.join("model.kv")).unwrap();
    let broken = model.replacen("w = [", "w = [nan, ", 1);
    assert_ne!(broken, model);
    std::fs::write(run.join("model.kv"), broken).unwrap();
    let out = dfm(&["eval", "--model", path(&run.join("model.kv")), "--out-dir", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
