use std::path::PathBuf;
use std::process::Command;

use serde_json::{json, Value};

fn specs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn run(args: &[&str]) -> (Value, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_blender-forge"))
        .args(args)
        .output()
        .expect("binary runs");
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    assert_eq!(v["schema"], json!("blender-forge/1"));
    (v, out.status.code().unwrap_or(-1))
}

fn spec(name: &str) -> String {
    specs().join(name).to_string_lossy().into_owned()
}

#[test]
fn sf3_pipeline_has_both_blenders_activating_each_other() {
    let (v, code) = run(&["pipeline", "--spec", &spec("sf3.json")]);
    assert_eq!(code, 0);
    let r = &v["result"];
    assert_eq!(r["case"], json!("SF-3"));
    assert_eq!(r["verdicts"]["certified"], json!(["cs", "cu"]));
    assert_eq!(r["activation"]["mutual"], json!(true));
    let edges = r["edges"].as_array().unwrap();
    for (from, to) in [("cs", "cu"), ("cu", "cs")] {
        assert!(edges.contains(&json!({"from": from, "to": to, "relation": "activates"})));
    }
}

#[test]
fn rational_pipeline_expects_simple_dynamics() {
    let (v, code) = run(&["pipeline", "--spec", &spec("rational.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["case"], json!("SF-rational-all"));
    assert_eq!(v["result"]["simple"]["verdict"]["verdict"], json!("simple_hyperbolic_expected"));
}

#[test]
fn malformed_spec_exits_1_with_error_json() {
    let dir = std::env::temp_dir().join(format!("bf-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\"cycle\": {\"lambda\": 2}}").unwrap();
    let (v, code) = run(&["moduli", "--spec", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], json!("invalid_spec"));

    let (v, code) = run(&["moduli", "--spec", &spec("sf1.json"), "--set", "params.serch.eps=1"]);
    assert_eq!(code, 1);
    assert!(v["error"]["detail"].as_str().unwrap().contains("params.serch"));
}

#[test]
fn exhausted_search_exits_2_and_gap_exits_3() {
    let (v, code) = run(&["search-pairs", "--spec", &spec("sf1.json"), "--set", "params.search.k_max=50"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], json!("window_exhausted"));

    let (v, code) = run(&["certify", "--spec", &spec("sf1.json"), "--set", "params.search.eps=2e-4"]);
    assert_eq!(code, 3);
    assert_eq!(v["error"]["kind"], json!("coverage_gap"));
}

#[test]
fn search_writes_csv_and_is_reproducible() {
    let dir = std::env::temp_dir().join(format!("bf-csv-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("pairs.csv");
    let args = ["search-pairs", "--spec", &spec("df1.json"), "--out", csv.to_str().unwrap()];
    let (a, code) = run(&args);
    assert_eq!(code, 0);
    let (b, _) = run(&args);
    assert_eq!(a, b);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,m,t,s,w,A_km,B_km"));
    assert_eq!(lines.count(), a["result"]["pairs"]["pairs"].as_array().unwrap().len());
}

#[test]
fn cones_and_unfold_commands_run() {
    let (v, code) = run(&["cones", "--spec", &spec("sf1.json"), "--set", "params.cones.samples=50"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["report"]["passed"], json!(true));

    let (v, code) = run(&["unfold", "--spec", &spec("sf1.json")]);
    assert_eq!(code, 0);
    assert!(v["result"]["sequence"]["entries"].as_array().unwrap().len() >= 5);
}
