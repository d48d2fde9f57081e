use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subconic")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn gauge_manhattan() {
    let v = stdout_json(&run(&["gauge", "--cone", "axis2", "--vector", "[3,4]"]));
    assert!((v["value"].as_f64().unwrap() - 7.0).abs() < 1e-12);
    assert_eq!(v["combo"].as_array().unwrap().len(), 2);
}

#[test]
fn gauge_twistor_default_point() {
    let v = stdout_json(&run(&["gauge", "--cone", "twistor4", "--vector", "[[1,0],[0,0]]"]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 2e-3);
}

#[test]
fn outside_band_is_a_library_error() {
    let out = run(&["gauge", "--cone", "bandsphere", "--point", "[0,0,1]", "--vector", "[1,0,0]"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty cone fiber"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["gauge", "--cone", "axis2"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    let bad = run(&["distance", "--cone", "axis2", "--from", "[0,0]", "--to", "[1,1]", "--mode", "sideways"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn ball_reports_flat_edge() {
    let v = stdout_json(&run(&["ball", "--cone", "axis2", "--flat"]));
    assert_eq!(v["vertices"].as_array().unwrap().len(), 4);
    assert!((v["flat_segment"]["midpoint_gauge"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn zigzag_table_converges() {
    let out = run(&["zigzag", "--fields", "dx;x*dy", "--point", "[0,0]", "--t", "1", "--n-schedule", "4,16,64"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# config: "));
    assert!(text.lines().any(|l| l == "N,endpoint_err,length,target_length"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    let errs: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    let target: f64 = rows[0][3].parse().unwrap();
    assert!((target - 1.5).abs() < 1e-6);
}

#[test]
fn distance_both_modes() {
    let v = stdout_json(&run(&["distance", "--cone", "axis2", "--from", "[0,0]", "--to", "[3,4]", "--k", "4,8"]));
    assert!((v["subfinsler"]["value"].as_f64().unwrap() - 7.0).abs() < 1e-3);
    assert!((v["subconic"]["value"].as_f64().unwrap() - 7.0).abs() < 1e-3);
}

#[test]
fn experiment_is_reproducible() {
    let args = ["experiment", "main-theorem", "--cone", "axis2", "--pairs", "3", "--seed", "11"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().any(|l| l == "pair_id,d_sF,d_D,gap,N"));
    assert_eq!(csv_rows(&text).len(), 9);
    let other = run(&["experiment", "main-theorem", "--cone", "axis2", "--pairs", "3", "--seed", "12"]);
    assert_ne!(other.stdout, text.as_bytes());
}

#[test]
fn twistor_decompose_pieces_are_cone_vectors() {
    let v = stdout_json(&run(&["twistor", "decompose", "--b", "4", "--matrix", "[[0.3,-1.2],[0.7,0.4]]"]));
    let pieces = v.as_array().unwrap();
    assert!(!pieces.is_empty() && pieces.len() <= 4);
    assert!(pieces.iter().all(|p| p["in_cone"] == Value::Bool(true)));
}

#[test]
fn twistor_chain_length() {
    let v = stdout_json(&run(&[
        "twistor",
        "chain",
        "--b",
        "4",
        "--from",
        "[[1,0,0,0],[0,1,0,0]]",
        "--to",
        "[[1,0,0.5,0],[0,1,0,0.5]]",
    ]));
    let len = v["length"].as_f64().unwrap();
    assert!(len.is_finite() && len > 0.0);
    assert!(!v["chain"]["spheres"].as_array().unwrap().is_empty());
}
