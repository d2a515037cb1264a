//! End-to-end tests of the compiled binary: exit codes, JSON round-trips,
//! and byte-exact render goldens.

use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ffhecke");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(BIN)
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

const B233: &str = r#"{"pieces":[{"slope":{"num":1,"den":1},"rank":2},{"slope":{"num":2,"den":3},"rank":3},{"slope":{"num":1,"den":3},"rank":3}]}"#;
const B2X6: &str = r#"{"pieces":[{"slope":{"num":1,"den":1},"rank":2},{"slope":{"num":2,"den":3},"rank":6}]}"#;

#[test]
fn no_arguments_is_a_usage_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["reach", "--levi", "2,3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn chi2b_json_round_trips() {
    let out = run(&["chi2b", "--levi", "2,3,3", "--chi", "2,2,1", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let bundle: ffhecke::Bundle = serde_json::from_value(v["bundle"].clone()).unwrap();
    assert_eq!(bundle.rank(), 8);
    assert_eq!(v["permutation"], serde_json::json!([3, 2, 1]));
}

#[test]
fn classify_irreducible_pair_reports_none_with_success() {
    // Blocks (3,4): characters (2,1) and (1,3) give a modification that is
    // not reducible.
    let from = r#"{"pieces":[{"slope":{"num":2,"den":3},"rank":3},{"slope":{"num":1,"den":4},"rank":4}]}"#;
    let to = r#"{"pieces":[{"slope":{"num":3,"den":4},"rank":4},{"slope":{"num":1,"den":3},"rank":3}]}"#;
    let out = run(&["classify", "--from", from, "--to", to]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("none"));

    let out = run(&["classify", "--from", from, "--to", to, "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["modification_exists"], serde_json::json!(true));
    assert!(v["reduction"].is_null());
}

#[test]
fn stalk_probe_at_vanishing_target_exits_one() {
    // Over blocks (3,4) with character (2,2), the stalk vanishes at the
    // bundle attached to (1,3).
    let probe = r#"{"pieces":[{"slope":{"num":3,"den":4},"rank":4},{"slope":{"num":1,"den":3},"rank":3}]}"#;
    let out = run(&["stalk", "--levi", "3,4", "--chi", "2,2", "--probe", probe]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("zero"));

    // Unprobed, the same stalk has a target and succeeds.
    let out = run(&["stalk", "--levi", "3,4", "--chi", "2,2", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["is_equivalence"], serde_json::json!(true));
}

#[test]
fn certify_emit_check_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.json");
    let path_str = path.to_str().unwrap();
    let out = run(&["certify", "--levi", "3,4", "--chi", "2,2", "--emit", path_str]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    let out = run(&["check", path_str]);
    assert_eq!(out.status.code(), Some(0));

    // Corrupt one digit and the checker must reject.
    let text = std::fs::read_to_string(&path).unwrap();
    let corrupted = text.replacen("\"m1\": 4", "\"m1\": 5", 1);
    assert_ne!(text, corrupted, "fixture must contain the expected field");
    std::fs::write(&path, corrupted).unwrap();
    let out = run(&["check", path_str]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn certify_negative_character_routes_through_det_twist() {
    let out = run(&["certify", "--levi", "2,3", "--chi", "-1,0", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["verdict"], serde_json::json!("certified"));
}

#[test]
fn budget_env_variable_caps_candidates() {
    let out = run_env(
        &["certify", "--levi", "3,4", "--chi", "2,2"],
        "FFHECKE_BUDGET",
        "1",
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("out of budget"));
}

#[test]
fn sweep_summary_line_and_parallel_agreement() {
    let serial = run(&["sweep", "--max-n", "4", "--max-chi", "3"]);
    assert_eq!(serial.status.code(), Some(0));
    let text = stdout(&serial);
    let summary = text.lines().last().unwrap();
    assert!(
        summary.starts_with("certified: ") && summary.ends_with(", failed: 0"),
        "unexpected summary {summary:?}"
    );
    let parallel = run(&["sweep", "--max-n", "4", "--max-chi", "3", "--parallel"]);
    assert_eq!(stdout(&parallel), text);
}

#[test]
fn render_matches_goldens() {
    let out = run(&["render", "--bundle", B233, "--mark-min"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), include_str!("golden/marked_polygon.svg"));

    let out = run(&[
        "render", "--bundle", B233, "--overlay", B2X6, "--format", "ascii",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), include_str!("golden/overlay.txt"));
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let a = run(&["certify", "--levi", "2,3,3", "--chi", "2,2,2", "--json"]);
    let b = run(&["certify", "--levi", "2,3,3", "--chi", "2,2,2", "--json"]);
    assert_eq!(a.stdout, b.stdout);
    let a = run(&["reach", "--bundle", B233, "--json"]);
    let b = run(&["reach", "--bundle", B233, "--json"]);
    assert_eq!(a.stdout, b.stdout);
}
