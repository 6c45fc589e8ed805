use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn example() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/sliding_example.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grncert")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_model(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("model.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn partition_of_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["partition", "--model", example().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = read(&dir.path().join("partition.json"));
    assert_eq!(v["domain_count"], 9);
    assert_eq!(v["sinks"], serde_json::json!(["D2"]));
    assert_eq!(v["ray_matrices"].as_array().unwrap().len(), 4);
}

#[test]
fn no_threshold_model_has_one_domain() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(
        dir.path(),
        r#"{"n":1,"degradation":[1.0],"thresholds":[[]],"extremal_systems":[{"production":[{"target":1,"terms":[{"coeff":1.0,"factors":[]}]}]}]}"#,
    );
    let o = run(&["partition", "--model", m.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&dir.path().join("partition.json"))["domain_count"], 1);
}

#[test]
fn missing_model_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["partition", "--model", "/nonexistent/model.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn stg_of_example_is_shared() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["stg", "--model", example().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let first = read(&dir.path().join("stg_k1.json"));
    for k in 2..=4 {
        assert_eq!(read(&dir.path().join(format!("stg_k{k}.json")))["edges"], first["edges"]);
    }
    assert!(dir.path().join("stg_k1.dot").exists());
    assert_eq!(read(&dir.path().join("assumption1.json"))["passed"], true);
}

#[test]
fn stg_mismatch_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // x1 grows in the first system and decays in the second: the crossing of x1 = 1 differs.
    let m = write_model(
        dir.path(),
        r#"{"n":1,"degradation":[1.0],"thresholds":[[1.0]],"extremal_systems":[
            {"production":[{"target":1,"terms":[{"coeff":2.0,"factors":[]}]}]},
            {"production":[{"target":1,"terms":[{"coeff":0.5,"factors":[]}]}]}]}"#,
    );
    let o = run(&["stg", "--model", m.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let v = read(&dir.path().join("assumption1.json"));
    assert_eq!(v["passed"], false);
    assert!(!v["differing"].as_array().unwrap().is_empty());
}

#[test]
fn certify_and_verify_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let model = example();
    let o = run(&["certify", "--model", model.to_str().unwrap(), "--out", out, "--mode", "extremal"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cert = read(&dir.path().join("certificate.json"));
    assert_eq!(cert["functions"].as_array().unwrap().len(), 4);

    let o = run(&[
        "verify", "--model", model.to_str().unwrap(), "--out", out, "--samples", "10", "--seed", "3", "--x0", "0.2,0.5",
        "--x0", "0.5,2.5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read(&dir.path().join("verification.json"));
    assert_eq!(report["all_pass"], true);
    assert_eq!(report["jobs"].as_array().unwrap().len(), 20);
    let csv = std::fs::read_to_string(dir.path().join("trajectories/l0000_x0.csv")).unwrap();
    assert!(csv.starts_with("t,x_1,x_2,domain_id,V\n"));

    // Same inputs give byte-identical artifacts.
    let again = tempfile::tempdir().unwrap();
    let out2 = again.path().to_str().unwrap();
    std::fs::copy(dir.path().join("certificate.json"), again.path().join("certificate.json")).unwrap();
    let o = run(&[
        "verify", "--model", model.to_str().unwrap(), "--out", out2, "--samples", "10", "--seed", "3", "--x0", "0.2,0.5",
        "--x0", "0.5,2.5",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        std::fs::read(dir.path().join("verification.json")).unwrap(),
        std::fs::read(again.path().join("verification.json")).unwrap()
    );

    // Sign-flipped negative control.
    let mut bad = cert.clone();
    for f in bad["functions"].as_array_mut().unwrap() {
        for piece in f["pieces"].as_array_mut().unwrap() {
            for key in ["P", "d"] {
                negate(&mut piece[key]);
            }
            negate(&mut piece["omega"]);
        }
    }
    let bad_path = dir.path().join("bad.json");
    std::fs::write(&bad_path, bad.to_string()).unwrap();
    let o = run(&[
        "verify", "--model", model.to_str().unwrap(), "--out", out, "--certificate", bad_path.to_str().unwrap(),
        "--samples", "3", "--x0", "0.2,0.5",
    ]);
    assert_eq!(code(&o), 5);

    let o = run(&["verify", "--model", model.to_str().unwrap(), "--out", out, "--samples", "0", "--x0", "0.2,0.5"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

fn negate(v: &mut Value) {
    match v {
        Value::Array(a) => a.iter_mut().for_each(negate),
        Value::Number(n) => *v = serde_json::json!(-n.as_f64().unwrap()),
        _ => {}
    }
}

#[test]
fn certify_without_sink_exclusion_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "certify", "--model", example().to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--mode", "extremal",
        "--no-drop-sinks",
    ]);
    assert!(matches!(code(&o), 3 | 4), "exit {}", code(&o));
    assert!(!dir.path().join("certificate.json").exists());
    assert!(dir.path().join("solve.json").exists());
}

#[test]
fn single_extremal_modes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(
        dir.path(),
        r#"{"n":1,"degradation":[1.0],"thresholds":[[1.0]],"extremal_systems":[
            {"production":[{"target":1,"terms":[{"coeff":2.0,"factors":[{"var":1,"threshold":1,"sign":"minus"}]}]}]}]}"#,
    );
    let codes: Vec<i32> = ["common", "extremal"]
        .iter()
        .map(|mode| {
            code(&run(&[
                "certify", "--model", m.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--mode", mode,
            ]))
        })
        .collect();
    assert_eq!(codes[0], codes[1]);
}
