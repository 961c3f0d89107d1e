//! End-to-end runs of the `lemp` binary on a small generated dataset.

use std::path::Path;
use std::process::Command;

fn lemp(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_lemp")).args(args).env("RUST_LOG", "warn").output().unwrap();
    assert!(out.status.success(), "lemp {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_probe_select_run_cost() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"max_epochs": 30, "patience": 10, "probe_seeds": 2, "interval": 5, "batch": 20}"#).unwrap();

    lemp(&["--seed", "4", "--out", p(&data), "synth", "--n", "120", "--feature-dim", "8"]);
    for f in ["nodes.jsonl", "edges.csv", "embeddings.bin", "meta.json"] {
        assert!(data.join(f).exists(), "{f} missing");
    }

    lemp(&["--config", p(&cfg), "--out", p(&out), "probe", p(&data)]);
    let probe: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("probe.json")).unwrap()).unwrap();
    assert!(probe["verdict"].is_string());

    lemp(&["--config", p(&cfg), "--out", p(&out), "select", p(&data), "--k", "10"]);
    let selected = std::fs::read_to_string(out.join("selected.csv")).unwrap();
    assert_eq!(selected.lines().next(), Some("u,v,score_wf,score_wb,lambda,fused"));
    assert_eq!(selected.lines().count(), 11);

    let cache = tmp.path().join("cache.jsonl");
    lemp(&["--config", p(&cfg), "--out", p(&out), "run", p(&data), "--budget", "40", "--cache", p(&cache)]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(report["budget"]["paid"].as_u64().unwrap() <= 40);
    assert!(out.join("epochs.csv").exists());

    let cost = lemp(&["cost", p(&cache)]);
    assert!(String::from_utf8_lossy(&cost.stdout).contains('$'));
}

#[test]
fn sweep_writes_one_row_per_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"max_epochs": 20, "patience": 10, "interval": 5, "batch": 10}"#).unwrap();
    lemp(&["--out", p(&data), "synth", "--kind", "homophilic", "--n", "80", "--feature-dim", "6"]);
    lemp(&["--config", p(&cfg), "--out", p(&out), "run", p(&data), "--sweep", "0,10,30"]);
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 4);
}

#[test]
fn bad_config_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"omega": "x"}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lemp")).args(["--config", p(&cfg), "probe", "nowhere"]).output().unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
