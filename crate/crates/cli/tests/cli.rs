use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn planhint(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_planhint"));
    for var in ["PLANHINT_MODE", "PLANHINT_SEED", "PLANHINT_FIXTURE_PATH", "PLANHINT_PG_CONNINFO", "PLANHINT_BACKEND", "PLANHINT_CONFIG"] {
        cmd.env_remove(var);
    }
    cmd.args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = planhint(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn enumerate_five_tables_one_operator_each() {
    let out = ok(&["enumerate", "--tables", "5", "--scans", "1", "--joins", "1"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1680);
    let distinct: std::collections::HashSet<&&str> = lines.iter().collect();
    assert_eq!(distinct.len(), 1680);
    assert_eq!(ok(&["enumerate", "--tables", "5", "--scans", "1", "--joins", "1", "--count"]).trim(), "1680");
    assert_eq!(ok(&["enumerate", "--tables", "3", "--scans", "4", "--joins", "3", "--count"]).trim(), "6912");
    assert_eq!(ok(&["enumerate", "--tables", "4", "--scans", "SeqScan", "--joins", "HashJoin", "--left-deep"]).lines().count(), 24);
}

#[test]
fn transform_matches_golden() {
    let golden = std::fs::read_to_string(core_fixture("four_table_hints.txt")).unwrap();
    let out = ok(&["transform", "--explain", s(&core_fixture("four_table_explain.json"))]);
    assert_eq!(out, golden);
    let comment = ok(&["transform", "--explain", s(&core_fixture("four_table_explain.json")), "--format", "comment"]);
    assert!(comment.starts_with("/*+") && comment.trim_end().ends_with("*/"));
}

#[test]
fn oracle_selection_is_always_right() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.jsonl");
    ok(&["collect", "--synthesize", "15", "--source", "both", "--evaluation", "--out", s(&labels)]);
    let report: Value = serde_json::from_str(&ok(&["select", "--labels", s(&labels), "--strategy", "oracle"])).unwrap();
    assert_eq!(report["queries"], 15);
    assert_eq!(report["accuracy_pct"], 100.0);
}

#[test]
fn recorded_fixtures_replay_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    ok(&["--seed", "5", "fixtures", "generate", "--synthesize", "8", "--out", s(&fx)]);
    let queries = fx.join("queries.sql");
    let run = |tag: &str| {
        let out = dir.path().join(format!("{tag}.jsonl"));
        let mut args = vec!["--seed", "5", "--fixture-path", s(&fx), "bench", "--queries", s(&queries)];
        args.extend(["--pipeline", "gs", "--out", s(&out)]);
        let summary = ok(&args);
        (summary, std::fs::read(&out).unwrap())
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let summary: Value = serde_json::from_str(&a.0).unwrap();
    assert_eq!(summary["queries"], 8);
    let parts = ["stats_ms", "inference_ms", "planning_ms", "exec_ms"].map(|k| summary[k].as_f64().unwrap());
    assert!((parts.iter().sum::<f64>() - summary["e2e_ms"].as_f64().unwrap()).abs() < 1e-6);

    let labels = dir.path().join("labels.jsonl");
    let collect = ["--seed", "5", "--fixture-path", s(&fx), "collect", "--queries", s(&queries), "--out", s(&labels)];
    ok(&collect);
    let first = std::fs::read(&labels).unwrap();
    ok(&collect);
    assert_eq!(first, std::fs::read(&labels).unwrap());
}

#[test]
fn dataset_writes_records_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let summary: Value = serde_json::from_str(&ok(&[
        "dataset", "--synthesize", "20", "--validation-count", "2", "--out-dir", s(&out),
    ]))
    .unwrap();
    assert_eq!(summary["records"], 40);
    let split: Value = serde_json::from_str(&std::fs::read_to_string(out.join("split.json")).unwrap()).unwrap();
    let sizes = ["train", "validation", "test"].map(|k| split[k].as_array().unwrap().len());
    assert_eq!(sizes, [16, 2, 2]);
    assert_eq!(std::fs::read_to_string(out.join("dataset.jsonl")).unwrap().lines().count(), 40);
    assert!(out.join("dataset_schema.json").exists());
}

#[test]
fn exit_codes_classify_failures() {
    assert_eq!(planhint(&["--help"]).status.code(), Some(0));
    assert_eq!(planhint(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(planhint(&["enumerate", "--tables", "3", "--scans", "9"]).status.code(), Some(1));
    assert_eq!(planhint(&["--mode", "live", "snapshot"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(planhint(&["transform", "--explain", s(&bad)]).status.code(), Some(2));
    assert_eq!(planhint(&["collect", "--query", "SELECT count(*) FROM nowhere"]).status.code(), Some(2));

    let cfg = dir.path().join("live.toml");
    std::fs::write(&cfg, "mode = \"live\"\n[live]\nconninfo = \"dbname=x\"\npsql = \"/nonexistent/psql\"\n").unwrap();
    assert_eq!(planhint(&["--config", s(&cfg), "snapshot"]).status.code(), Some(3));
}

#[test]
fn config_file_env_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 3\n[fixture]\ntoy_scale = 0.5\n").unwrap();
    let snap = |extra: &[&str], env_seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_planhint"));
        cmd.env_remove("PLANHINT_SEED");
        if let Some(v) = env_seed {
            cmd.env("PLANHINT_SEED", v);
        }
        let out = cmd.args(["--config", s(&cfg)]).args(extra).arg("snapshot").output().unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let file = snap(&[], None);
    let env = snap(&[], Some("4"));
    let flag = snap(&["--seed", "3"], Some("4"));
    assert_ne!(file, env);
    assert_eq!(file, flag);
}
