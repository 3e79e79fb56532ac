mod common;

use std::io::Write;
use std::process::{Command, Stdio};

use serde_json::Value;

fn lightbot(args: &[&str], stdin: Option<&str>) -> (bool, String, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_lightbot"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    if let Some(s) = stdin {
        child.stdin.take().unwrap().write_all(s.as_bytes()).unwrap();
    } else {
        drop(child.stdin.take());
    }
    let out = child.wait_with_output().unwrap();
    (out.status.success(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn data(rel: &str) -> String {
    common::data_dir().join(rel).to_string_lossy().into_owned()
}

#[test]
fn solve_exact_prints_path_and_length() {
    let (ok, out, _) = lightbot(&["solve", "--exact", &data("mini/square-2x2.json")], None);
    assert!(ok);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["length"], 5);
    assert_eq!(v["actions"].as_array().unwrap().len(), 5);
}

#[test]
fn solve_needs_a_method() {
    let (ok, _, _) = lightbot(&["solve", &data("mini/line-1x2.json")], None);
    assert!(!ok);
}

#[test]
fn solve_ppo_streams_updates_then_result() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ppo.toml");
    std::fs::write(&cfg, "horizon = 128\nminibatch = 32\nmax_env_steps = 20000\nplateau_updates = 5\n").unwrap();
    let (ok, out, err) =
        lightbot(&["solve", "--ppo", &data("mini/line-1x2.json"), "--seed", "3", "--config", cfg.to_str().unwrap()], None);
    assert!(ok, "{err}");
    let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let (last, updates) = lines.split_last().unwrap();
    assert!(!updates.is_empty());
    assert!(updates.iter().all(|u| u["record"] == "update" && u["env_steps"].is_u64()));
    assert_eq!(last["record"], "result");
    assert_eq!(last["length"], 2);
}

#[test]
fn compress_reads_tokens_from_stdin() {
    let (ok, out, _) = lightbot(&["compress"], Some("walk,walk,light\nwalk\nwalk\nlight,walk,walk,light\n"));
    assert!(ok);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["flat_length"], 9);
    assert_eq!(v["compressed_length"], 5);
    assert_eq!(v["compressibility_exact"], "4/9");
    assert_eq!(v["program"]["main"], serde_json::json!(["call1"]));
    let (ok, _, err) = lightbot(&["compress"], Some("walk,fly"));
    assert!(!ok);
    assert!(err.contains("fly"));
}

#[test]
fn run_exports_a_trace() {
    // walking is blocked by the step, so the demo program never lights anything
    let (ok, out, _) = lightbot(&["run", &data("puzzles/tutorial-3.json"), &data("demo_program.json")], None);
    assert!(ok);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "program_ended");
    assert_eq!(v["actions"].as_array().unwrap().len(), 38);
    assert_eq!(v["frames"].as_array().unwrap().len(), 39);

    let (ok, out, _) = lightbot(&["run", &data("mini/line-1x2.json"), &data("demo_program.json")], None);
    assert!(ok);
    let v: Value = serde_json::from_str(&out).unwrap();
    // four walks (one succeeds, three are blocked), four more, then the light
    assert_eq!(v["status"], "completed");
    assert_eq!(v["actions"].as_array().unwrap().len(), 9);
}

#[test]
fn serve_config_drives_export_and_import() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("server.toml");
    std::fs::write(
        &cfg,
        format!("data_dir = \"logs\"\npuzzle_dir = \"{}\"\n", data("puzzles")),
    )
    .unwrap();
    let (ok, out, err) = lightbot(&["export", "--config", cfg.to_str().unwrap()], None);
    assert!(ok, "{err}");
    assert!(out.is_empty());

    let line = r#"{"session_id":"s1","timestamp":5,"kind":"session_start","payload":{"condition":"default_flat","order":["tutorial-1","tutorial-2","tutorial-3","puzzle-1","puzzle-2","puzzle-3","puzzle-4","puzzle-5","puzzle-6"],"seed":1}}"#;
    let file = dir.path().join("in.jsonl");
    std::fs::write(&file, format!("{line}\n")).unwrap();
    let (ok, _, err) = lightbot(&["import", "--config", cfg.to_str().unwrap(), file.to_str().unwrap()], None);
    assert!(ok, "{err}");
    let (ok, out, _) = lightbot(&["export", "--config", cfg.to_str().unwrap(), "--condition", "default_flat"], None);
    assert!(ok);
    assert_eq!(out, format!("{line}\n"));
    let (_, out, _) = lightbot(&["export", "--config", cfg.to_str().unwrap(), "--condition", "efficient_flat"], None);
    assert!(out.is_empty());
}

#[test]
fn analyze_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs.jsonl");
    std::fs::write(&logs, "").unwrap();
    let out = dir.path().join("tables");
    let (ok, _, err) =
        lightbot(&["analyze", logs.to_str().unwrap(), "--puzzles", &data("puzzles"), "--out", out.to_str().unwrap()], None);
    assert!(ok, "{err}");
    assert!(out.join("per_condition.csv").exists());
}
