use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qikey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qikey"))
        .args(args)
        .env_remove("QIKEY_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// 60 rows: `id` is unique, `pair` repeats every two rows, `bit` alternates.
fn write_table(dir: &Path) -> String {
    let mut text = String::from("id,pair,bit\n");
    for i in 0..60 {
        text.push_str(&format!("{i},{},{}\n", i / 2, i % 2));
    }
    let path = dir.join("t.csv");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn filter_accepts_a_key_and_rejects_the_empty_set() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_table(dir.path());
    let v = json(&qikey(&["filter", "--input", &input, "--epsilon", "0.1", "--attrs", "id", "-q"]));
    assert_eq!(v["decision"], "accept");
    assert!(v.get("witness").is_none());
    assert!(v["build_ms"].is_number());

    let v = json(&qikey(&["filter", "--input", &input, "--epsilon", "0.1", "--attrs", ""]));
    assert_eq!(v["decision"], "reject");
    assert_eq!(v["witness"].as_array().unwrap().len(), 2);
}

#[test]
fn names_and_indices_both_work() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_table(dir.path());
    let by_name = json(&qikey(&["filter", "--input", &input, "--epsilon", "0.1", "--attrs", "pair,bit", "--no-timings"]));
    let by_index = json(&qikey(&["filter", "--input", &input, "--epsilon", "0.1", "--attrs", "1,2", "--no-timings"]));
    assert_eq!(by_name, by_index);
    assert_eq!(by_name["decision"], "accept");
}

#[test]
fn baseline_sample_is_larger_by_inverse_root_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("a,b\n");
    for i in 0..5000 {
        text.push_str(&format!("{i},{}\n", i % 7));
    }
    let input = dir.path().join("big.csv");
    std::fs::write(&input, text).unwrap();
    let input = input.to_str().unwrap();
    let args = ["filter", "--input", input, "--epsilon", "0.01", "--constant", "1", "--attrs", "a"];
    let tuple = json(&qikey(&args));
    let pair = json(&qikey(&[&args[..], &["--baseline"]].concat()));
    let ratio = pair["sample_size"].as_f64().unwrap() / tuple["sample_size"].as_f64().unwrap();
    assert_eq!(tuple["sample_size"], 20);
    assert!((ratio - 10.0).abs() < 0.5, "{ratio}");
}

#[test]
fn unknown_column_and_bad_flags_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_table(dir.path());
    let out = qikey(&["filter", "--input", &input, "--epsilon", "0.1", "--attrs", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    assert_eq!(qikey(&["filter", "--bogus"]).status.code(), Some(2));
    assert_eq!(qikey(&["filter", "--input", &input, "--epsilon", "abc"]).status.code(), Some(2));
    let out = qikey(&["filter", "--input", &input, "--epsilon", "1.5", "--attrs", "id"]);
    assert_eq!(out.status.code(), Some(2));
    let out = qikey(&["filter", "--input", "/nonexistent.csv", "--epsilon", "0.1", "--attrs", "id"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_table(dir.path());
    let args = ["minkey", "--input", &input, "--epsilon", "0.2", "--constant", "1", "--seed", "9", "--no-timings", "--exact"];
    let a = qikey(&args);
    let b = qikey(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["size"], v["exact"]["size"]);

    let bench = ["bench", "--input", &input, "--epsilon", "0.25", "--queries", "5", "--trials", "3", "--no-timings"];
    assert_eq!(qikey(&bench).stdout, qikey(&bench).stdout);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_table(dir.path());
    let args = ["filter", "--input", &input, "--epsilon", "0.3", "--constant", "1", "--attrs", "", "--no-timings"];
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qikey"));
        cmd.args(args);
        match seed {
            Some(s) => cmd.env("QIKEY_SEED", s),
            None => cmd.env_remove("QIKEY_SEED"),
        };
        cmd.output().unwrap().stdout
    };
    let explicit = qikey(&[&args[..], &["--seed", "123"]].concat()).stdout;
    assert_eq!(run(Some("123")), explicit);
    assert_eq!(run(None), qikey(&[&args[..], &["--seed", "0"]].concat()).stdout);
}

#[test]
fn sketch_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_table(dir.path());
    let sketch = dir.path().join("s.qik");
    let sketch = sketch.to_str().unwrap();
    let built = json(&qikey(&[
        "filter", "--input", &input, "--epsilon", "0.2", "--sketch-out", sketch, "--attrs", "bit", "--no-timings",
    ]));
    assert!(std::fs::read_to_string(sketch).unwrap().starts_with("QIKEY-SKETCH v1\n"));
    let loaded = json(&qikey(&["filter", "--sketch-in", sketch, "--attrs", "bit", "--no-timings"]));
    assert_eq!(built, loaded);
    // a filter sketch is not an estimator
    assert_eq!(qikey(&["estimate", "--sketch-in", sketch, "--attrs", "bit"]).status.code(), Some(2));
}

#[test]
fn estimate_reports_small_for_a_key() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_table(dir.path());
    let base = ["estimate", "--input", &input, "--k", "1", "--alpha", "0.5", "--epsilon", "0.5"];
    let v = json(&qikey(&[&base[..], &["--attrs", "id"]].concat()));
    assert_eq!(v, serde_json::json!({"result": "small"}));
    let v = json(&qikey(&[&base[..], &["--attrs", "bit"]].concat()));
    assert!(v["estimate"].as_f64().unwrap() > 0.0);
    assert!(v["d_a"].is_u64() && v["pairs"].is_u64());
    let out = qikey(&[&base[..], &["--attrs", "pair,bit"]].concat());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    let out_s = out.to_str().unwrap();
    let v = json(&qikey(&["gen", "grid", "--q", "3", "--m", "3", "--output", out_s]));
    assert_eq!(v["rows"], 27);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(format!("{out_s}.json")).unwrap()).unwrap();
    assert_eq!(manifest, v);
    let v = json(&qikey(&["filter", "--input", out_s, "--epsilon", "0.5", "--attrs", "0,1,2"]));
    assert_eq!(v["decision"], "accept");

    let enc = dir.path().join("enc.csv");
    let v = json(&qikey(&["gen", "encoding", "--k", "2", "--t", "2", "--m", "3", "--output", enc.to_str().unwrap()]));
    assert_eq!((v["rows"].as_u64(), v["columns"].as_u64()), (Some(8), Some(7)));
    assert_eq!(v["params"]["matrix"].as_array().unwrap().len(), 4);

    let clique = dir.path().join("clique.csv");
    let v = json(&qikey(&["gen", "clique", "--n", "100", "--epsilon", "0.02", "--m", "3", "--output", clique.to_str().unwrap()]));
    assert_eq!(v["params"]["clique_size"], 20);
    assert_eq!(qikey(&["gen", "grid", "--q", "10", "--m", "9", "--output", out_s]).status.code(), Some(2));
}

#[test]
fn analyze_subcommands() {
    let v = json(&qikey(&["analyze", "elementary", "--sizes", "10,1*30,0*9", "--r", "10"]));
    assert_eq!(v["value"], 173116515.0);
    let v = json(&qikey(&["analyze", "collision", "--sizes", "2,2,0,0", "--epsilon", "0.1", "--r", "2", "--mode", "with"]));
    assert!((v["probability"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let v = json(&qikey(&["analyze", "birthday", "--bins", "365", "--delta", "0.5"]));
    assert_eq!(v["q"], 23);
    let v = json(&qikey(&["analyze", "claim", "--sizes", "1*20", "--epsilon", "0.1", "--r", "3", "--m", "2"]));
    assert_eq!(v["claim_holds"], true);
    let v = json(&qikey(&["analyze", "encoding-gamma", "--k", "2", "--t", "2", "--u", "2"]));
    assert_eq!(v["gamma"], 7);
    let v = json(&qikey(&["analyze", "worstcase", "--n", "6", "--r", "4", "--epsilon", "0.25"]));
    assert_eq!(v["attained_by_two_values"], true);
    assert_eq!(qikey(&["analyze", "worstcase", "--n", "20", "--r", "4", "--epsilon", "0.25"]).status.code(), Some(2));
}

#[test]
fn bench_on_tiny_file_clamps_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_table(dir.path());
    let v = json(&qikey(&["bench", "--input", &input, "--epsilon", "0.25", "--queries", "10", "--trials", "2", "--jobs", "2"]));
    assert_eq!(v["tuple_sample_size"], 60);
    assert_eq!(v["pair_sample_size"], 120);
    assert!(v["agreement"].as_f64().unwrap() <= 1.0);
    assert!(v["speedup"].is_number());
}
