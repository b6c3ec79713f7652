//! End-to-end tests of the command-line interface and its exit-code
//! contract: 0 ok/stable, 1 unstable/violation, 2 input error, 3 internal
//! failure, 4 guard refusal.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_stable-market");

fn run_cli(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary runs")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn write_temp(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).expect("temp write");
    path
}

#[test]
fn solve_prints_outcome_and_exits_zero() {
    let out = run_cli(&["solve", golden("one_by_one.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout, include_str!("golden/one_by_one.outcome.json"));
}

#[test]
fn solve_rejects_malformed_json() {
    let dir = TempDir::new().unwrap();
    let path = write_temp(&dir, "broken.json", "{ not json");
    let out = run_cli(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn solve_rejects_invalid_instance() {
    let dir = TempDir::new().unwrap();
    let path = write_temp(
        &dir,
        "reversed.json",
        r#"{
            "sellers": ["s1"], "buyers": ["b1"],
            "pairs": [{
                "seller": "s1", "buyer": "b1", "lower": 5, "upper": 3,
                "seller_valuation": {"kind": "linear", "a": "1", "b": "0"},
                "buyer_valuation": {"kind": "linear", "a": "1", "b": "7"}
            }]
        }"#,
    );
    let out = run_cli(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("bounds reversed"));
}

#[test]
fn solve_writes_trace_with_final_quiescence() {
    let dir = TempDir::new().unwrap();
    let trace_path = dir.path().join("trace.json");
    let out = run_cli(&[
        "solve",
        golden("two_sellers_one_buyer.json").to_str().unwrap(),
        "--trace",
        trace_path.to_str().unwrap(),
        "--out",
        dir.path().join("outcome.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&trace_path).unwrap()).unwrap();
    let passes = trace.as_array().unwrap();
    assert!(!passes.is_empty());
    let final_k = passes.last().unwrap()["K"].as_array().unwrap();
    assert!(final_k.is_empty(), "final pass must leave K empty");
}

#[test]
fn verify_accepts_solver_outcome() {
    let dir = TempDir::new().unwrap();
    let outcome_path = dir.path().join("outcome.json");
    let solve = run_cli(&[
        "solve",
        golden("one_by_one.json").to_str().unwrap(),
        "--out",
        outcome_path.to_str().unwrap(),
    ]);
    assert_eq!(solve.status.code(), Some(0));
    let verify = run_cli(&[
        "verify",
        golden("one_by_one.json").to_str().unwrap(),
        outcome_path.to_str().unwrap(),
    ]);
    assert_eq!(verify.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8(verify.stdout).unwrap()).unwrap();
    assert_eq!(report["stable"], serde_json::json!(true));
}

#[test]
fn verify_flags_planted_blocking_pair() {
    let dir = TempDir::new().unwrap();
    let outcome_path = write_temp(
        &dir,
        "unmatched.json",
        r#"{
            "matching": [],
            "q": {"s1": "0"},
            "r": {"b1": "0"},
            "iterations": 1
        }"#,
    );
    let out = run_cli(&[
        "verify",
        golden("one_by_one.json").to_str().unwrap(),
        outcome_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report["stable"], serde_json::json!(false));
    let witnesses = report["witnesses"].as_array().unwrap();
    assert!(!witnesses.is_empty());
    assert_eq!(witnesses[0]["c"], serde_json::json!(4));
}

#[test]
fn verify_rejects_unknown_agent() {
    let dir = TempDir::new().unwrap();
    let outcome_path = write_temp(
        &dir,
        "ghost.json",
        r#"{
            "matching": [{"seller": "ghost", "buyer": "b1", "price": 7}],
            "q": {"s1": "4"},
            "r": {"b1": "0"},
            "iterations": 1
        }"#,
    );
    let out = run_cli(&[
        "verify",
        golden("one_by_one.json").to_str().unwrap(),
        outcome_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn audit_accepts_solver_trace() {
    let dir = TempDir::new().unwrap();
    let trace_path = dir.path().join("trace.json");
    run_cli(&[
        "solve",
        golden("two_sellers_one_buyer.json").to_str().unwrap(),
        "--trace",
        trace_path.to_str().unwrap(),
        "--out",
        dir.path().join("outcome.json").to_str().unwrap(),
    ]);
    let out = run_cli(&[
        "audit",
        golden("two_sellers_one_buyer.json").to_str().unwrap(),
        trace_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report["clean"], serde_json::json!(true));
}

#[test]
fn audit_flags_forged_trace() {
    let dir = TempDir::new().unwrap();
    let trace_path = dir.path().join("trace.json");
    run_cli(&[
        "solve",
        golden("two_sellers_one_buyer.json").to_str().unwrap(),
        "--trace",
        trace_path.to_str().unwrap(),
        "--out",
        dir.path().join("outcome.json").to_str().unwrap(),
    ]);
    // Forge a decreasing buyer payoff in the second pass.
    let mut trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&trace_path).unwrap()).unwrap();
    trace[1]["r"]["b1"] = serde_json::json!("-5");
    let forged_path = write_temp(&dir, "forged.json", &trace.to_string());
    let out = run_cli(&[
        "audit",
        golden("two_sellers_one_buyer.json").to_str().unwrap(),
        forged_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let lemmas: Vec<&str> = report["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["lemma"].as_str().unwrap())
        .collect();
    assert!(lemmas.contains(&"Lemma 5(iii)"));
}

#[test]
fn gen_is_deterministic_and_seed_sensitive() {
    let a = run_cli(&["gen", "--seed", "1", "--sellers", "2", "--buyers", "2"]);
    let b = run_cli(&["gen", "--seed", "1", "--sellers", "2", "--buyers", "2"]);
    let c = run_cli(&["gen", "--seed", "2", "--sellers", "2", "--buyers", "2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn gen_solve_verify_pipeline_is_stable() {
    let dir = TempDir::new().unwrap();
    for seed in ["3", "17", "88"] {
        let inst_path = dir.path().join(format!("inst{seed}.json"));
        let out_path = dir.path().join(format!("out{seed}.json"));
        let gen = run_cli(&[
            "gen",
            "--seed",
            seed,
            "--sellers",
            "4",
            "--buyers",
            "3",
            "--lo",
            "-4",
            "--hi",
            "9",
            "--out",
            inst_path.to_str().unwrap(),
        ]);
        assert_eq!(gen.status.code(), Some(0));
        let solve = run_cli(&[
            "solve",
            inst_path.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(solve.status.code(), Some(0));
        let verify = run_cli(&[
            "verify",
            inst_path.to_str().unwrap(),
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(verify.status.code(), Some(0), "seed {seed} not stable");
    }
}

#[test]
fn gen_accepts_config_file() {
    let dir = TempDir::new().unwrap();
    let config_path = write_temp(
        &dir,
        "config.json",
        r#"{"seed": 9, "num_sellers": 2, "num_buyers": 1, "price_range": [0, 6]}"#,
    );
    let out = run_cli(&["gen", "--config", config_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"s2\""));
    assert!(!text.contains("\"b2\""));
}

#[test]
fn oracle_contains_solver_outcome() {
    let out = run_cli(&["oracle", golden("one_by_one.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let outcomes: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let list = outcomes.as_array().unwrap();
    assert_eq!(list.len(), 5, "stable prices 3..=7");
    assert!(list
        .iter()
        .any(|o| o["matching"][0]["price"] == serde_json::json!(7)));
}

#[test]
fn oracle_refuses_oversized_instances() {
    let dir = TempDir::new().unwrap();
    let inst_path = dir.path().join("big.json");
    run_cli(&[
        "gen",
        "--seed",
        "5",
        "--sellers",
        "3",
        "--buyers",
        "3",
        "--out",
        inst_path.to_str().unwrap(),
    ]);
    let out = run_cli(&["oracle", inst_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn check_reports_validation_results() {
    let good = run_cli(&["check", golden("one_by_one.json").to_str().unwrap()]);
    assert_eq!(good.status.code(), Some(0));

    let dir = TempDir::new().unwrap();
    let bad_path = write_temp(
        &dir,
        "flat.json",
        r#"{
            "sellers": ["s1"], "buyers": ["b1"],
            "pairs": [{
                "seller": "s1", "buyer": "b1", "lower": 0, "upper": 10,
                "seller_valuation": {"kind": "linear", "a": "0", "b": "0"},
                "buyer_valuation": {"kind": "linear", "a": "1", "b": "7"}
            }]
        }"#,
    );
    let bad = run_cli(&["check", bad_path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8(bad.stdout).unwrap()).unwrap();
    assert_eq!(report["valid"], serde_json::json!(false));
}

#[test]
fn eps_override_is_validated() {
    let out = Command::new(BIN)
        .args(["solve", golden("one_by_one.json").to_str().unwrap()])
        .env("STABLE_MARKET_EPS", "not-a-number")
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));

    let ok = Command::new(BIN)
        .args(["solve", golden("one_by_one.json").to_str().unwrap()])
        .env("STABLE_MARKET_EPS", "1e-7")
        .output()
        .expect("binary runs");
    assert_eq!(ok.status.code(), Some(0));
}
