//! Drives the `re2llm` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn re2llm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_re2llm"))
        .args(args)
        .args(["--log-level", "error"])
        .env_remove("RE2_CACHE_DIR")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = re2llm(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: [&str; 14] = [
    "--modes", "3", "--sessions", "400", "--items", "400", "--seed", "7",
    "--set", "train.episodes=10", "--set", "eval.runs=1", "--set", "eval.test_sample_size=40",
];

fn simulate(dir: &Path) {
    let out = dir.display().to_string();
    let mut args = vec!["simulate", "--out", &out];
    args.extend(SMALL);
    ok(&args);
}

#[test]
fn simulate_writes_stamped_reproducible_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let names = ["world.json", "dataset.json", "kb.json", "kb_log.json", "policy.json", "report.json"];
    let first: Vec<Vec<u8>> = names.iter().map(|n| fs::read(dir.path().join(n)).unwrap()).collect();
    for n in names {
        let v = json(&dir.path().join(n));
        assert_eq!(v["run"]["command"], "simulate", "{n}");
        assert_eq!(v["run"]["seed"], 7, "{n}");
        assert_eq!(v["run"]["config"]["sim.num_modes"], 3, "{n}");
        assert_eq!(v["run"]["config"]["train.seed"], 7, "{n}");
    }
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["reports"].as_array().unwrap().len(), 4);
    assert!(!dir.path().join(".re2llm.lock").exists());

    simulate(dir.path());
    for (n, bytes) in names.iter().zip(first) {
        assert_eq!(fs::read(dir.path().join(n)).unwrap(), bytes, "{n} changed on re-run");
    }
}

#[test]
fn downstream_commands_run_on_simulated_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let out = dir.path().display().to_string();
    let eval = ["--set", "eval.runs=1", "--set", "eval.test_sample_size=40", "--seed", "7"];

    // The standalone no-hint evaluation is the same path as the closed loop's.
    let mut args = vec!["evaluate", "--variant", "no-hint", "--out", &out];
    args.extend(eval);
    ok(&args);
    let alone = json(&dir.path().join("report-no-hint.json"));
    let report = json(&dir.path().join("report.json"));
    let in_loop = report["reports"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["config"]["variant"] == "no_hint")
        .unwrap();
    assert_eq!(alone["metrics"], in_loop["metrics"]);
    assert_eq!(alone["rows"], in_loop["rows"]);

    let mut args = vec!["train-agent", "--few-shot", "50", "--episodes", "3", "--out", &out];
    args.extend(eval);
    ok(&args);
    let policy = json(&dir.path().join("policy.json"));
    assert_eq!(policy["run"]["command"], "train-agent");
    assert_eq!(policy["episodes_trained"], 3);
    assert_eq!(policy["run"]["config"]["train.few_shot"], 50);

    let mut args = vec!["evaluate", "--variant", "agent", "--out", &out];
    args.extend(eval);
    ok(&args);

    let dataset = json(&dir.path().join("dataset.json"));
    let sid = dataset["split"]["test"][0]["session_id"].as_str().unwrap().to_string();
    let stdout = ok(&["recommend", "--session-id", &sid, "--out", &out]);
    assert!(stdout.contains("prompt:"));
    assert!(stdout.contains("ranked:"));
    let trace = json(&dir.path().join(format!("recommend-{sid}.json")));
    assert_eq!(trace["session_id"], sid.as_str());

    let mut args = vec!["build-kb", "--capacity", "2", "--out", &out];
    args.extend(eval);
    ok(&args);
    assert!(json(&dir.path().join("kb.json"))["hints"].as_array().unwrap().len() <= 2);
}

#[test]
fn prepare_data_from_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let mut items = String::new();
    for i in 0..60 {
        items += &format!("{{\"item_id\":\"m{i}\",\"title\":\"Movie {i}\"}}\n");
    }
    let mut log = String::new();
    for u in 0..30 {
        for k in 0..6 {
            let item = (u * 7 + k * 11) % 30; // every item in exactly 6 sessions
            let ts = 1_704_067_200 + u * 86_400 + k * 600;
            log += &format!("{{\"user_id\":\"u{u}\",\"item_id\":\"m{item}\",\"timestamp\":{ts},\"rating\":5}}\n");
        }
    }
    let items_path = dir.path().join("items.jsonl");
    let log_path = dir.path().join("log.jsonl");
    fs::write(&items_path, items).unwrap();
    fs::write(&log_path, log).unwrap();

    let out = dir.path().join("art").display().to_string();
    let args = [
        "prepare-data",
        "--interactions",
        log_path.to_str().unwrap(),
        "--items",
        items_path.to_str().unwrap(),
        "--out",
        &out,
        "--seed",
        "3",
    ];
    ok(&args);
    let first = fs::read(dir.path().join("art/dataset.json")).unwrap();
    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["raw_sessions"], 30);
    assert_eq!(v["split"]["validation"].as_array().unwrap().len(), 3);
    assert_eq!(v["split"]["test"].as_array().unwrap().len(), 6);
    assert_eq!(v["split"]["train"].as_array().unwrap().len(), 21 * 5);
    assert_eq!(v["run"]["config"]["data.seed"], 3);
    ok(&args);
    assert_eq!(fs::read(dir.path().join("art/dataset.json")).unwrap(), first);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"sim.num_modes": 2, "sim.num_sessions": 300, "sim.num_items": 300, "eval.runs": 3, "eval.test_sample_size": 20, "train.episodes": 2}"#,
    )
    .unwrap();
    let out = dir.path().join("art").display().to_string();
    ok(&["simulate", "--config", cfg.to_str().unwrap(), "--set", "eval.runs=1", "--out", &out]);
    let report = json(&dir.path().join("art/report.json"));
    assert_eq!(report["run"]["config"]["eval.runs"], 1);
    assert_eq!(report["run"]["config"]["sim.num_modes"], 2);
    assert_eq!(report["reports"][0]["config"]["runs"], 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();

    assert_eq!(re2llm(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(re2llm(&["evaluate", "--bogus-flag"]).status.code(), Some(2));
    assert_eq!(re2llm(&["evaluate", "--variant", "best"]).status.code(), Some(2));
    assert_eq!(re2llm(&["evaluate", "--set", "train.betta=1", "--out", &out]).status.code(), Some(2));

    let missing = re2llm(&["build-kb", "--out", &out]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("prepare-data"));

    fs::write(dir.path().join(".re2llm.lock"), "12345\n").unwrap();
    let locked = re2llm(&["evaluate", "--out", &out]);
    assert_eq!(locked.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&locked.stderr).contains("in use"));
}
