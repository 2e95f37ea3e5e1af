use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn ratgroup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratgroup")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn golden(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", name].iter().collect();
    std::fs::read_to_string(p).unwrap()
}

const FAMILIES: [(&str, [&str; 4]); 3] = [
    ("determine_3_1_5_2.json", ["3", "1", "5", "2"]),
    ("determine_5_1_5_-1.json", ["5", "1", "5", "-1"]),
    ("determine_1_1_1_2.json", ["1", "1", "1", "2"]),
];

fn determine_args(c: &[&str; 4]) -> Vec<String> {
    ["determine", "-a", c[0], "-b", c[1], "-A", c[2], "-B", c[3]].iter().map(|s| s.to_string()).collect()
}

#[test]
fn determine_matches_golden_files() {
    for (file, c) in FAMILIES {
        let args = determine_args(&c);
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = ratgroup(&args);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(String::from_utf8(out.stdout).unwrap(), golden(file), "{file}");
    }
}

#[test]
fn determine_is_byte_identical_across_runs_and_threads() {
    let base = ["determine", "-a", "5", "-b", "1", "-A", "5", "-B", "-1"];
    let one = ratgroup(&base);
    let mut threaded = base.to_vec();
    threaded.extend(["--threads", "1"]);
    let two = ratgroup(&threaded);
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn torsion_two_family() {
    let out = ratgroup(&["determine", "-a", "5", "-b", "1", "-A", "5", "-B", "-1"]);
    let v = json(&out);
    assert_eq!(v["torsion_invariants"], serde_json::json!([2]));
    assert_eq!(v["free_generators"], serde_json::json!([{"5": 1}]));
}

#[test]
fn trivial_family() {
    let v = json(&ratgroup(&["determine", "-a", "3", "-b", "1", "-A", "5", "-B", "2"]));
    assert_eq!(v["torsion_invariants"], serde_json::json!([]));
    assert_eq!(v["free_rank"], 0);
    assert_eq!(v["trivial"], true);
}

#[test]
fn membership_of_57_is_a_torsion_class() {
    let out = ratgroup(&["membership", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "-r", "57", "-N", "100000"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["status"], "torsion_class");
    assert_eq!(v["minimal_v"], 2);
    assert_eq!(v["target"], serde_json::json!({"3": 1, "19": 1}));
}

#[test]
fn represent_square_of_57_and_reject_2() {
    let out = ratgroup(&["represent", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "-r", "3^2*19^2", "-N", "300"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verified"], true);
    assert!(!v["certificate"].as_array().unwrap().is_empty());

    let out = ratgroup(&["represent", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "-r", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["status"], "not_representable");

    let out = ratgroup(&["membership", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "-r", "2", "-N", "300"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["dual_obstruction"]["value"], serde_json::json!([1, 2]));
}

#[test]
fn usage_errors_exit_one() {
    let out = ratgroup(&["membership", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "-r", "2/x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad rational"));
    assert_eq!(ratgroup(&["determine", "-a", "5"]).status.code(), Some(1));
    assert_eq!(ratgroup(&["determine", "-a", "1", "-b", "1", "-A", "2", "-B", "2"]).status.code(), Some(1));
    assert_eq!(ratgroup(&["--help"]).status.code(), Some(0));
}

#[test]
fn character_table_labels_round_trip() {
    let out = ratgroup(&["--format", "text", "characters", "--modulus", "63", "--order-divides", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let labels: Vec<&str> = text.lines().filter_map(|l| l.trim().strip_prefix("label: ")).collect();
    assert!(!labels.is_empty());
    let v = json(&ratgroup(&["characters", "--modulus", "63", "--order-divides", "6"]));
    let from_json: Vec<&str> = v["characters"].as_array().unwrap().iter().map(|c| c["label"].as_str().unwrap()).collect();
    assert_eq!(labels, from_json);
    for l in labels {
        let back = ratgroup(&["characters", "--modulus", "63"]);
        assert!(String::from_utf8_lossy(&back.stdout).contains(l));
    }
}

#[test]
fn eta_and_theta_inspection() {
    let v = json(&ratgroup(&["eta", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "--ell", "2", "--beta", "1", "--gamma", "1"]));
    assert_eq!(v["value"], "0");
    let v = json(&ratgroup(&["eta", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "--ell", "2", "--beta", "3", "--gamma", "0"]));
    assert_eq!(v["value"], "0");
    let v = json(&ratgroup(&["theta", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "--d1", "1", "--d2", "1"]));
    assert_eq!(v["value"], "1/2");
    let out = ratgroup(&["theta", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "--d1", "3", "--d2", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_and_correlate_reports() {
    let v = json(&ratgroup(&["oracle", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "-N", "500"]));
    assert_eq!(v["torsion"], serde_json::json!([2]));
    assert_eq!(v["free_rank"], 1);
    let v = json(&ratgroup(&["oracle", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "-N", "500", "--restrict-class", "0,2"]));
    assert!(v["free_rank"].as_u64().unwrap() >= 1);

    let v = json(&ratgroup(&["correlate", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "-N", "20000"]));
    assert_eq!(v["mean_re"], 1.0);
    assert_eq!(v["abs_diff"], 0.0);
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["mean_re", "mean_im", "product_re", "product_im", "abs_diff", "S_x", "x", "P"]);
    let v = json(&ratgroup(&["correlate", "-a", "5", "-b", "1", "-A", "5", "-B", "-1", "-N", "20000", "--dual", "1"]));
    assert_eq!(v["mean_re"], 1.0);
}
