use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> String {
    root().join("fixtures").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confmodels")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn propagator_in_dimension_three() {
    let o = run(&["propagator-verify", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("residual: 0"));
}

#[test]
fn plain_powers_fail_in_dimension_five() {
    let o = run(&["propagator-verify", "--n", "5", "--undivided"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stdout(&o).contains("residual: 0"));
}

#[test]
fn arnold_table_in_arity_three() {
    let o = run(&["cohomology", "--family", "graphs-n", "--n", "2", "--arity", "3", "--max-degree", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let dims: Vec<String> = stdout(&o).lines().skip(1).map(|l| l.split_whitespace().last().unwrap().to_string()).collect();
    assert_eq!(dims, ["1", "3", "2"]);
    let o = run(&["arnold-check", "--n", "3", "--arity", "3"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn d2check_over_the_sphere() {
    let s2 = fixture("s2.json");
    let o = run(&["d2check", "--family", "graphs-m", "--pd", &s2, "--max-edges", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for fam in ["graphs-n-m", "framed"] {
        let o = run(&["d2check", "--family", fam, "--pd", &s2, "--max-edges", "2"]);
        assert_eq!(o.status.code(), Some(0), "{fam}");
    }
    let o = run(&["d2check", "--family", "bi", "--n", "2", "--max-edges", "3"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn malformed_inputs_exit_with_two() {
    let o = run(&["d2check", "--family", "graphs-m", "--pd", "/nonexistent/model.json"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n\": 2,\n \"basis\": [").unwrap();
    let o = run(&["basis", "--family", "graphs-m", "--pd", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let o = run(&["diff", "--n", "2", "--graph", "{\"n\": 2, \"externals\": 1, \"edges\": [[\"e1\", \"i7\", \"plain\"]]}"]);
    assert_eq!(o.status.code(), Some(2));
    // unbounded decorations over S²
    let o = run(&["basis", "--family", "graphs-m", "--pd", &fixture("s2.json"), "--max-deco", "none"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unbounded"));
}

#[test]
fn reports_are_deterministic() {
    let s3 = fixture("s3.json");
    let args = ["--format", "json", "basis", "--family", "graphs-m", "--pd", &s3, "--arity", "2", "--max-edges", "2"];
    let a = run(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_confmodels")).args(args).env("CONFMODELS_THREADS", "1").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["ok"], true);
    assert!(v["report"].as_array().unwrap().len() > 5);
}

#[test]
fn sampling_follows_the_seed() {
    let args = ["--format", "json", "d2check", "--n", "3", "--arity", "3", "--sample", "20"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["report"]["checked"], 20);
}

#[test]
fn diff_of_a_tadpole_is_the_euler_class() {
    let o = run(&[
        "--format",
        "json",
        "diff",
        "--family",
        "graphs-m",
        "--pd",
        &fixture("s2.json"),
        "--graph",
        "{\"n\": 2, \"externals\": 1, \"edges\": [[\"e1\", \"e1\", \"plain\"]]}",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let terms = v["report"].as_array().unwrap();
    assert_eq!(terms.len(), 1);
    assert_eq!(terms[0]["decorations"]["e1"], serde_json::json!(["v"]));
    assert!(terms[0]["coefficient"] == "2" || terms[0]["coefficient"] == "-2");
}

#[test]
fn mc_and_iterated_integral_checks() {
    for n in ["2", "3", "5"] {
        assert_eq!(run(&["mc-check", "--n", n]).status.code(), Some(0), "n={n}");
    }
    let o = run(&["iterated-integral-check", "--n", "2", "--loop-order", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn framing_change_on_the_torus() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = dir.path().join("sigma.json");
    std::fs::write(&sigma, r#"{"E": {"n": 2, "externals": 1, "decorations": {"e1": ["a"]}, "coefficient": "3"}}"#).unwrap();
    let t2 = fixture("t2.json");
    let o = run(&["framing-change", "--pd", &t2, "--sigma", sigma.to_str().unwrap(), "--max-edges", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("chain map"));
    let o = run(&[
        "framing-change",
        "--pd",
        &t2,
        "--sigma",
        sigma.to_str().unwrap(),
        "--graph",
        "{\"n\": 2, \"externals\": 2, \"edges\": [[\"e1\", \"e2\", \"plain\"]]}",
    ]);
    assert_eq!(o.status.code(), Some(0));
    // untwisted edge and tadpole terms plus the edge removed against σ(E)
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert!(out.lines().any(|l| l.contains("{a}") && (l.starts_with("(3)") || l.starts_with("(-3)"))), "{out}");
    // a degree 2 image of E is rejected
    std::fs::write(&sigma, r#"{"E": {"n": 2, "externals": 1, "decorations": {"e1": ["v"]}}}"#).unwrap();
    let o = run(&["framing-change", "--pd", &fixture("s2.json"), "--sigma", sigma.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coaction_and_matrix_export() {
    let edge = "{\"n\": 2, \"externals\": 2, \"edges\": [[\"e1\", \"e2\", \"plain\"]]}";
    // the edge stays in the block or becomes a tadpole at the collapsed vertex
    let o = run(&["coact", "--n", "2", "--graph", edge]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = run(&["coact", "--family", "framed", "--pd", &fixture("s2.json"), "--graph", edge, "--words", "E;"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.sms");
    let o = run(&["--output", out.to_str().unwrap(), "export-matrix", "--n", "2", "--arity", "3", "--loop-order", "0", "--degree", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().next().unwrap().ends_with(" M"));
    assert!(text.trim_end().ends_with("0 0 0"));
}
