//! End-to-end pipeline checks: file round-trips, solve/check composition,
//! and the command-line binary's exit-code contract.

use std::path::Path;
use std::process::Command;

use soda::engine::{solve, Permutation, SodaOutcome, SolveMode};
use soda::fixtures;
use soda::gen::{
    counterexample_market, generate_market, CounterexamplePrefs, CoupleRule, GenParams,
    CONFIRMED_COUNTEREXAMPLE_SEED,
};
use soda::io;
use soda::matching::is_stable;

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("soda-pipeline-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn generate_write_parse_round_trip() {
    let mut p = GenParams::new(30, 12);
    p.couples = CoupleRule::Count(4);
    p.fitness = true;
    p.single_list_cap = Some(10);
    let market = generate_market(&p).unwrap();
    let path = tmp("roundtrip-market.json");
    io::write_market(&market, &path).unwrap();
    let parsed = io::read_market(&path).unwrap();
    assert_eq!(market, parsed);
}

#[test]
fn solve_output_passes_check() {
    let m = fixtures::demo_market();
    let report = solve(&m, Permutation::identity(2), SolveMode::Classic);
    let SodaOutcome::Stable { matching, .. } = &report.outcome else {
        panic!()
    };
    let path = tmp("demo-matching.json");
    io::write_matching(&m, matching, &path).unwrap();
    let parsed = io::read_matching(&m, &path).unwrap();
    assert!(is_stable(&m, &parsed).unwrap());
}

#[test]
fn trace_jsonl_has_one_record_per_event() {
    let m = fixtures::eviction_market();
    let report = solve(&m, Permutation::identity(2), SolveMode::Classic);
    let jsonl = io::trace_to_jsonl(&report.trace);
    let lines: Vec<&str> = jsonl.lines().collect();
    let expected =
        report.trace.restarts.len() + report.trace.evictions.len() + report.trace.placements.len();
    assert_eq!(lines.len(), expected);
    for line in lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("step").is_some() && v.get("phase").is_some());
    }
}

fn soda_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_soda"))
}

#[test]
fn cli_generate_solve_check_pipeline() {
    let market_path = tmp("cli-market.json");
    let matching_path = tmp("cli-matching.json");
    let trace_path = tmp("cli-trace.jsonl");

    let out = soda_bin()
        .args([
            "generate",
            "--n",
            "40",
            "--couples",
            "4",
            "--seed",
            "5",
            "--out",
        ])
        .arg(&market_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = soda_bin()
        .args(["solve"])
        .arg(&market_path)
        .args(["--mode", "classic", "--out"])
        .arg(&matching_path)
        .args(["--trace"])
        .arg(&trace_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(trace_path.exists());

    let out = soda_bin()
        .args(["check"])
        .arg(&market_path)
        .arg(&matching_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("stable"));
}

#[test]
fn cli_oracle_reports_nonexistence_with_exit_code_one() {
    let m = counterexample_market(
        4,
        CounterexamplePrefs::Seeded(CONFIRMED_COUNTEREXAMPLE_SEED),
    )
    .unwrap();
    let path = tmp("cli-counterexample.json");
    io::write_market(&m, &path).unwrap();
    let out = soda_bin().args(["oracle"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("none"));

    // The solver also fails on it, with exit code 1.
    let out = soda_bin().args(["solve"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cli_malformed_input_is_exit_code_two() {
    let path = tmp("cli-broken.json");
    std::fs::write(&path, "{\n  \"format\": \"soda-market/1\",\n  broken\n}").unwrap();
    let out = soda_bin().args(["solve"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":3:"), "line-anchored message, got: {err}");

    let missing = soda_bin()
        .args(["solve", "/nonexistent/market.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    // Unknown flags are rejected by the parser (clap uses exit code 2).
    let unknown = soda_bin().args(["solve", "--frobnicate"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn cli_experiment_writes_csv() {
    let csv_path = tmp("cli-sweep.csv");
    let out = soda_bin()
        .args([
            "experiment",
            "--op",
            "success-sweep",
            "--n",
            "30",
            "--couples-pct",
            "5",
            "--trials",
            "10",
            "--seed",
            "3",
            "--out",
        ])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("# soda-experiments/1"));
    assert!(text.contains("n,rule,couples,trials"));
}

#[test]
fn cli_pessimistic_runs() {
    let market_path = tmp("cli-pess.json");
    let out = soda_bin()
        .args([
            "generate",
            "--n",
            "20",
            "--couples",
            "5",
            "--capacity",
            "1",
            "--lambda",
            "8",
            "--single-list-cap",
            "20",
            "--couple-list-cap",
            "20",
            "--seed",
            "2",
            "--out",
        ])
        .arg(&market_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = soda_bin()
        .args(["pessimistic"])
        .arg(&market_path)
        .args(["--l", "3", "--seed", "1"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("visited="));
}

#[test]
fn cli_analyze_exports_dot_and_forest() {
    let market_path = tmp("cli-analyze-market.json");
    let m = fixtures::demo_market();
    io::write_market(&m, &market_path).unwrap();
    let dot = tmp("cli-graph.dot");
    let forest = tmp("cli-trees.json");
    let out = soda_bin()
        .args(["analyze"])
        .arg(&market_path)
        .args(["--r", "1", "--graph-out"])
        .arg(&dot)
        .args(["--trees-out"])
        .arg(&forest)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dot_text = std::fs::read_to_string(&dot).unwrap();
    assert!(dot_text.starts_with("digraph couples {"));
    let forest_text = std::fs::read_to_string(&forest).unwrap();
    let trees: serde_json::Value = serde_json::from_str(&forest_text).unwrap();
    assert_eq!(trees.as_array().unwrap().len(), 2);
}

#[test]
fn check_rejects_invalid_matching_files_with_exit_two() {
    let m = fixtures::demo_market();
    let market_path = tmp("cli-check-market.json");
    io::write_market(&m, &market_path).unwrap();
    // Overfill h0 by pointing three singles at it.
    let bad = tmp("cli-check-bad.json");
    std::fs::write(
        &bad,
        r#"{"format":"soda-matching/1","singles":{"0":0,"1":0,"2":0,"3":null,"4":null},"couples":[{"pair":null},{"pair":null}]}"#,
    )
    .unwrap();
    let out = soda_bin()
        .args(["check"])
        .arg(&market_path)
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn market_files_reject_wrong_paths() {
    assert!(io::read_market(Path::new("/nonexistent/never.json")).is_err());
}
