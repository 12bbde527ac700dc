use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

fn pands(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pands"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    let out = pands(&full);
    let v: Value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)));
    (v, out.status.code().unwrap())
}

#[test]
fn validate_two_class_model_passes() {
    let out = pands(&["validate", model("two_class_open.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# pands "));
    assert!(text.contains("# input sha256 "));
    assert!(text.contains("pass"));
}

#[test]
fn trace_three_class_state() {
    let m = model("three_class_open.json");
    let (v, code) = json(&[
        "trace",
        m.to_str().unwrap(),
        "--state",
        "1,3,3,2,2,3,1,2",
        "--position",
        "1",
    ]);
    assert_eq!(code, 0);
    let r = &v["result"];
    assert_eq!(r["swap_chain"], serde_json::json!([1, 4, 6, 8]));
    assert_eq!(r["departing_class"], 2);
    assert_eq!(r["next_state"], serde_json::json!([3, 3, 1, 2, 2, 1, 3]));
    assert_eq!(v["header"]["flags"][0], "--format");
}

#[test]
fn parse_error_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(
        &p,
        "{\n  \"schema\": \"pands-model/1\",\n  \"classes\": }\n",
    )
    .unwrap();
    let out = pands(&["stability", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    std::fs::write(&p, "{\"schema\": \"pands-model/9\", \"classes\": 1}").unwrap();
    assert_eq!(
        pands(&["stability", p.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn budget_exits_3() {
    let out = pands(&[
        "--budget",
        "50",
        "analyze",
        model("two_class_open.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn oracle_compare_acceptance_models() {
    for name in [
        "two_class_open.json",
        "six_class_closed.json",
        "six_class_tandem.json",
        "triangle_iso.json",
    ] {
        let (v, code) = json(&["oracle-compare", model(name).to_str().unwrap()]);
        assert_eq!(code, 0, "{name}");
        assert!(v["result"]["tv"].as_f64().unwrap() < 1e-10, "{name}");
    }
}

#[test]
fn oracle_compare_threshold_and_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("gen.txt");
    let m = model("two_class_open.json");
    let out = pands(&[
        "oracle-compare",
        m.to_str().unwrap(),
        "--capacity",
        "2",
        "--threshold",
        "0",
        "--triplets",
        t.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = std::fs::read_to_string(&t).unwrap();
    assert!(text.starts_with("# pands-triplets/1 n=7"));
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    // diagonal, 2 arrivals out of each of the 3 states below capacity, and one
    // completion target per non-empty state (the swap merges both positions)
    assert_eq!(rows, 7 + 3 * 2 + 6);
}

#[test]
fn cluster_compile_feeds_tandem_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let emitted = dir.path().join("tandem.json");
    let out = pands(&[
        "cluster-compile",
        model("three_machine_cluster.json").to_str().unwrap(),
        "--emit-model",
        emitted.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("initial (;A,A,B,B,1,1,2,2,3,3)"));
    let (v, code) = json(&["tandem-analyze", emitted.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["partition"]["closed_components"], 1);

    let (a, _) = json(&[
        "cluster-analyze",
        model("three_machine_cluster.json").to_str().unwrap(),
    ]);
    let b = a["result"]["metrics"]["types"][0]["blocking"]
        .as_f64()
        .unwrap();
    assert!(b > 0.0 && b < 0.1);
}

#[test]
fn non_adhering_initial_state_warns() {
    let (v, code) = json(&[
        "closed-analyze",
        model("triangle_iso.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);
    let out = pands(&["iso", model("triangle_iso.json").to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("isomorphic (1,2,1',2',2'',3)"));
}

#[test]
fn simulate_is_reproducible_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("trace.txt");
    let m = model("two_class_open.json");
    let args = [
        "simulate",
        m.to_str().unwrap(),
        "--events",
        "20000",
        "--reps",
        "3",
        "--seed",
        "7",
    ];
    let a = pands(&args);
    let b = pands(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let mut with_trace = args.to_vec();
    with_trace.extend(["--trace", t.to_str().unwrap(), "--trace-events", "50"]);
    assert_eq!(pands(&with_trace).status.code(), Some(0));
    let log = std::fs::read_to_string(&t).unwrap();
    assert_eq!(log.lines().count(), 50);
    assert!(log
        .lines()
        .all(|l| l.starts_with("t=") && l.contains(" ev=") && l.contains(" depart=")));

    let (v, code) = json(&[
        "simulate",
        model("three_machine_cluster.json").to_str().unwrap(),
        "--events",
        "20000",
        "--reps",
        "2",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["kind"], "protocol");
}

#[test]
fn table_and_json_render_the_same_data() {
    let m = model("two_class_open.json");
    let out = pands(&["stability", m.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    let (v, _) = json(&["stability", m.to_str().unwrap()]);
    assert_eq!(v["result"]["stable"], true);
    assert!(text.contains("stable: true"));
    assert_eq!(v["result"]["limmu_values"].as_array().unwrap().len(), 3);
}

#[test]
fn invalid_rate_function_is_refused_before_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("decreasing.json");
    std::fs::write(
        &p,
        r#"{"schema": "pands-model/1", "classes": 2, "arrival_rates": [0.5, 0.5],
            "rate_function": {"kind": "table", "entries": [
                {"macrostate": [1, 0], "rate": 1}, {"macrostate": [0, 1], "rate": 1},
                {"macrostate": [1, 1], "rate": 0.5}]},
            "capacity": 2}"#,
    )
    .unwrap();
    let out = pands(&["analyze", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("decreasing"));
    assert_eq!(
        pands(&["validate", p.to_str().unwrap(), "--max-total", "2"])
            .status
            .code(),
        Some(1)
    );
}
