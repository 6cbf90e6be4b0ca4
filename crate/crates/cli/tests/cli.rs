use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rp_urn::gof::TestReport;
use rp_urn::DerivedConstants;
use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_rp-urn");

const PARAMS: &str = r#"{
  "alpha": 1.0,
  "beta": 0.5,
  "b0": [0.3333333333333333, 0.3333333333333333, 0.3333333333333333],
  "B0": [0.6666666666666666, 0.6666666666666666, 0.6666666666666666]
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn constants_reports_gamma_and_lambda() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", PARAMS);
    let out = run(&["constants", "--params", &p]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["gamma"].as_f64().unwrap() - 5.0 / 6.0).abs() < 1e-12);
    assert!((v["lambda"].as_f64().unwrap() - 6.6).abs() < 1e-12);
    assert!((v["r_star"].as_f64().unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn gof_matches_pearson_at_unit_lambda() {
    let out = run(&["gof", "--counts", "3,1", "--probs", "0.5,0.5", "--lambda", "1"]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["statistic"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["dof"], 1);
    assert_eq!(v["reject"], false);
}

#[test]
fn gof_defaults_come_from_params() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", PARAMS);
    let out = run(&["gof", "--counts", "30,30,40", "--params", &p]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["lambda"].as_f64().unwrap() - 6.6).abs() < 1e-12);
}

#[test]
fn simulate_is_reproducible_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", PARAMS);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = run(&[
            "simulate", "--params", &p, "--steps", "500", "--seed", "7", "--record-psi",
            "--out", path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let (a, b) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 502);

    let other = run(&["simulate", "--params", &p, "--steps", "500", "--seed", "8"]);
    let same = run(&["simulate", "--params", &p, "--steps", "500", "--seed", "7"]);
    assert_ne!(other.stdout, same.stdout);
}

#[test]
fn exit_codes() {
    // Usage: unknown subcommand, missing required flag, missing input combination.
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["simulate"]).status.code(), Some(1));
    assert_eq!(run(&["gof", "--counts", "3,1"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    // Data: bad probabilities, unreadable or invalid files.
    let bad = run(&["gof", "--counts", "3,1", "--probs", "0.5,0.6", "--lambda", "1"]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(run(&["constants", "--params", "/nonexistent.json"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", r#"{"alpha": -1, "beta": 0.5, "b0": [1, 1], "B0": [1, 1]}"#);
    assert_eq!(run(&["constants", "--params", &p]).status.code(), Some(2));

    // Rejection only changes the status when asked to.
    let args = ["gof", "--counts", "300,100", "--probs", "0.5,0.5", "--lambda", "1"];
    assert_eq!(run(&args).status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.push("--fail-on-reject");
    assert_eq!(run(&strict).status.code(), Some(3));
}

#[test]
fn json_output_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", PARAMS);
    let out = dir.path().join("c.json");
    let res = run(&["constants", "--params", &p, "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let first = fs::read_to_string(&out).unwrap();
    let parsed: DerivedConstants = serde_json::from_str(&first).unwrap();
    let second = serde_json::to_string_pretty(&parsed).unwrap() + "\n";
    assert_eq!(first, second);

    let gof = run(&["gof", "--counts", "17,5,9", "--probs", "0.3,0.3,0.4", "--lambda", "2.5"]);
    let text = String::from_utf8(gof.stdout).unwrap();
    let parsed: TestReport = serde_json::from_str(&text).unwrap();
    assert_eq!(text, serde_json::to_string_pretty(&parsed).unwrap() + "\n");
}

fn clustered_csv(dir: &TempDir) -> String {
    let mut text = String::from("cluster_id,count_1,count_2,count_3\n");
    for (i, c) in [[70, 60, 70], [65, 68, 67], [72, 60, 68], [64, 70, 66], [160, 20, 20]]
        .iter()
        .enumerate()
    {
        text.push_str(&format!("c{i},{},{},{}\n", c[0], c[1], c[2]));
    }
    write(dir, "wide.csv", &text)
}

#[test]
fn estimate_and_cluster_test() {
    let dir = TempDir::new().unwrap();
    let data = clustered_csv(&dir);
    let est = run(&["estimate-lambda", "--data", &data]);
    assert!(est.status.success(), "{}", String::from_utf8_lossy(&est.stderr));
    let v = json(&est);
    assert_eq!(v["estimate"]["l"], 5);
    let lo = v["confidence_interval"]["lower"].as_f64().unwrap();
    let hi = v["confidence_interval"]["upper"].as_f64().unwrap();
    let lh = v["estimate"]["lambda_hat"].as_f64().unwrap();
    assert!(lo < lh && lh < hi);

    let ct = run(&["cluster-test", "--data", &data, "--lambda", "1"]);
    assert!(ct.status.success());
    let v = json(&ct);
    assert_eq!(v["lambda_source"], "supplied");
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 5);
    assert_eq!(reports[4]["cluster_id"], "c4");
    assert_eq!(reports[4]["reject"], true);
    assert_eq!(reports[0]["reject"], false);
    let strict = run(&["cluster-test", "--data", &data, "--lambda", "1", "--fail-on-reject"]);
    assert_eq!(strict.status.code(), Some(3));

    let bench = run(&["cluster-test", "--data", &data, "--null-mode", "benchmark",
        "--benchmark-cluster", "c0"]);
    assert!(bench.status.success());
    let v = json(&bench);
    assert_eq!(v["lambda_source"], "plug_in");
    assert_eq!(v["reports"].as_array().unwrap().len(), 4);

    let missing = run(&["cluster-test", "--data", &data, "--null-mode", "benchmark"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn couple_and_verify_produce_reports() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", r#"{"alpha": 1, "beta": 0.5, "b0": [0.5, 0.5], "B0": [2, 0]}"#);
    let out = run(&["couple", "--params", &p, "--other-balls", "0.5,1.5", "--steps", "10",
        "--replicates", "200", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["pairs"], 200);
    assert_eq!(v["stationary_mass"], true);

    let dump = dir.path().join("records.csv");
    let out = run(&["verify", "--params", &p, "--steps", "200", "--replicates", "50",
        "--check", "clt", "--dump", dump.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["low_power"], true);
    assert!(!v["checks"].as_array().unwrap().is_empty());
    assert!(Path::new(&dump).exists());
    assert!(fs::read_to_string(&dump).unwrap().lines().count() > 50);
}
