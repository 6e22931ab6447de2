use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_varifold-lab"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().args(args).arg("--out").arg(dir.join("out")).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

const LINE: &str = r#"{"n":2,"m":1,"primitives":[{"kind":"segment","start":[-1,0],"end":[1,0],"resolution":2000}]}"#;
const CROSS: &str = r#"{"n":2,"m":1,"primitives":[{"kind":"line-fan","angles":[0,1.5707963267948966],"resolution":8192}]}"#;

#[test]
fn monotonicity_on_a_line_passes() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "line.json", LINE);
    let out = run(dir.path(), &["check-monotonicity", "--scene", &scene, "--radius", "0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["version"], 1);
    assert_eq!(r["command"], "check-monotonicity");
    assert_eq!(r["pass"], true);
    assert!(r["result"]["residual"].as_f64().unwrap() <= 1e-9);
    for key in ["constants", "premises", "conclusions"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    assert!(dir.path().join("out/monotonicity.csv").exists());
}

#[test]
fn counterexample_depth_50() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["counterexample", "--depth", "50", "--f", "id", "--g", "id", "--exact"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(dir.path());
    let triples = r["result"]["triples"].as_array().unwrap();
    assert_eq!(triples.len(), 50);
    for (k, t) in triples.iter().enumerate() {
        let i = k as i32 + 1;
        assert_eq!(t["p"].as_f64().unwrap(), 2f64.powi(-(2 * i - 1)));
        assert_eq!(t["rho"].as_f64().unwrap(), 2f64.powi(-2 * i));
        assert_eq!(t["r"].as_f64().unwrap(), 2f64.powi(-2 * (i - 1)));
    }
    assert_eq!(r["result"]["exact_triples"][2]["p"], "1/32");
}

#[test]
fn partition_svg_is_deterministic_and_premise_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "cross.json", CROSS);
    let args = ["partition-run", "--scene", &scene, "--big-q", "2", "--lambda", "0.3", "--depth", "6"];
    let first = run(dir.path(), &args);
    // λ = 0.3 exceeds ε₂/(1+ε₂); recorded as a premise failure.
    assert_eq!(first.status.code(), Some(2));
    let svg = std::fs::read_to_string(dir.path().join("out/partition.svg")).unwrap();
    assert_eq!(svg.matches("stroke-dasharray=\"6 4\"").count(), 12);
    assert!(svg.contains("#1f77b4") && svg.contains("#d62728"));
    run(dir.path(), &args);
    assert_eq!(svg, std::fs::read_to_string(dir.path().join("out/partition.svg")).unwrap());
    let r = report(dir.path());
    assert_eq!(r["result"]["components"], serde_json::json!([2, 2, 2, 2, 2, 2]));
    assert_eq!(r["result"]["k0"], 1);
}

#[test]
fn conclusion_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // A half-covered annulus cell leaves residual mass but no premise to fail.
    let scene = write(
        dir.path(),
        "seg.json",
        r#"{"n":2,"m":1,"primitives":[{"kind":"segment","start":[1,0],"end":[3,0],"resolution":400}]}"#,
    );
    let out = run(dir.path(), &["detect-planes", "--scene", &scene, "--radius", "3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_and_io_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"n\": 2,\n \"m\": 1,\n \"primitives\": [}");
    let out = run(dir.path(), &["scene-build", "--scene", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let out = run(dir.path(), &["scene-build", "--scene", "/nonexistent/scene.json"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(dir.path(), &["check-monotonicity"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(dir.path(), &["counterexample", "--eps5", "-1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn graph_and_tangent_cone_commands() {
    let dir = tempfile::tempdir().unwrap();
    let two = write(
        dir.path(),
        "two.json",
        r#"{"n":2,"m":1,"primitives":[
            {"kind":"segment","start":[-1,0],"end":[1,0],"resolution":2048},
            {"kind":"segment","start":[-1,0.2],"end":[1,0.2],"resolution":2048}]}"#,
    );
    let out = run(dir.path(), &["graph-extract", "--scene", &two, "--big-q", "2", "--radius", "0.5"]);
    let r = report(dir.path());
    assert_eq!(r["result"]["q"], 2);
    assert_eq!(r["result"]["lip_estimate"], 0.0);
    // Two sheets at distance 0.2 are far from one tilted plane.
    assert_eq!(out.status.code(), Some(2));

    let curve = write(
        dir.path(),
        "curve.json",
        r#"{"n":2,"m":1,"primitives":[{"kind":"graph-curve","function":{"type":"abs-power","c":0.3,"p":1.5},"interval":[-1,1],"resolution":8000}]}"#,
    );
    let out = run(dir.path(), &["tangent-cone", "--scene", &curve, "--radius", "0.5", "--cone-c", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("out/decay.csv").exists());
}

#[test]
fn scene_build_writes_varifold_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "line.json", LINE);
    let out = run(dir.path(), &["scene-build", "--scene", &scene, "--resolution", "100"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(dir.path())["result"]["atoms"], 100);
    let v = std::fs::read_to_string(dir.path().join("out/varifold.json")).unwrap();
    let again = run(dir.path(), &["check-monotonicity", "--scene", dir.path().join("out/varifold.json").to_str().unwrap(), "--radius", "0.5"]);
    assert_eq!(again.status.code(), Some(0));
    assert!(v.contains("\"atoms\""));
    assert!(dir.path().join("out/scene.svg").exists());
}
