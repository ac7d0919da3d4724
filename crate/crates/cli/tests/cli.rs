use std::path::Path;
use std::process::{Command, Output};

fn tkmia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tkmia")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_passes() {
    let out = tkmia(&["check", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("suites passed"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for p in [&a, &b] {
        let out = tkmia(&["gen-data", "--n", "200", "--seed", "7", "--out", path(p)]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let first = std::fs::read_to_string(&a).unwrap();
    let line: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert_eq!(line["x"].as_array().unwrap().len(), 32);
    assert_eq!(line["y"].as_array().unwrap().len(), 10);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = tkmia(&["gen-data", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_with_missing_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = tkmia(&["report", "--config", path(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn train_attack_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    let model = dir.path().join("model.jsonl");
    assert!(tkmia(&["gen-data", "--n", "400", "--mean-relevant", "5", "--seed", "1", "--out", path(&data)]).status.success());
    assert!(tkmia(&["train", "--data", path(&data), "--out", path(&model), "--epochs", "10", "--seed", "1"]).status.success());

    let lines = std::fs::read_to_string(&data).unwrap();
    let index = lines
        .lines()
        .position(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["y"].as_array().unwrap().iter().filter(|b| b.as_u64() == Some(1)).count() >= 4
        })
        .unwrap();
    let out = tkmia(&[
        "attack", "--model", path(&model), "--data", path(&data), "--index", &index.to_string(), "--k", "3", "--seed", "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let outcome: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(outcome["method"], "tkmia");
    assert!(outcome["success"].is_boolean());
    assert_eq!(outcome["epsilon"].as_array().unwrap().len(), 32);

    let csv = dir.path().join("report.csv");
    let jsonl = dir.path().join("outcomes.jsonl");
    let config = serde_json::json!({
        "dataset": { "path": data },
        "victim": { "path": model },
        "train_fraction": 0.0,
        "k_values": [3],
        "scheme": { "random": { "m": 1 } },
        "methods": ["tkmia", "tkml_ap_u", "kfool"],
        "attack": { "max_iter": 50 },
        "max_instances": 20,
        "output_csv": csv,
        "output_jsonl": jsonl,
    });
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, config.to_string()).unwrap();
    let out = tkmia(&["report", "--config", path(&cfg), "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table, String::from_utf8(out.stdout).unwrap());
    assert!(table.starts_with("k,|S|,method,"));
    assert!(table.contains("kfool,not run"));
    assert!(jsonl.exists());
}
