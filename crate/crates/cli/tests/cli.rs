use std::fs;
use std::process::{Command, Output};

fn gronwall(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gronwall")).args(args).output().expect("run gronwall")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn distance_around_the_slit() {
    let out = gronwall(&["distance", "--manifold", "slit-plane", "--p", "-1,1", "--q", "1,1"]);
    assert_eq!(out.status.code(), Some(0));
    let d: f64 = stdout(&out).trim().parse().unwrap();
    assert!((d - 2.0 * 2f64.sqrt()).abs() < 1e-9, "{d}");
}

#[test]
fn distance_writes_the_segment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seg.csv");
    let out = gronwall(&["distance", "--manifold", "euclidean(2)", "--p", "0,0", "--q", "3,4", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "5");
    let csv = fs::read_to_string(path).unwrap();
    assert!(csv.lines().count() >= 3);
}

#[test]
fn flow_prints_a_trajectory() {
    let out = gronwall(&["flow", "--manifold", "euclidean(2)", "--field", "unit-y", "--p0", "0,-1", "--T", "2", "--samples", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0].split(',').next(), Some("t"));
    let last: Vec<f64> = lines[5].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last[..2], [2.0, 0.0]);
    assert!((last[2] - 1.0).abs() < 1e-12, "{}", last[2]);
}

#[test]
fn flow_leaving_the_domain_is_incomplete() {
    let out = gronwall(&["flow", "--manifold", "slit-plane", "--field", "unit-y", "--p0", "0,-1", "--T", "2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn certify_exit_codes() {
    let base = ["certify", "--manifold", "slit-plane", "--field", "unit-y", "--p0", "-1,-1", "--q0", "1,-1", "--T", "3"];
    assert_eq!(gronwall(&base).status.code(), Some(3));
    let mut forced = base.to_vec();
    forced.push("--force-incomplete");
    assert_eq!(gronwall(&forced).status.code(), Some(2));

    let ok = gronwall(&["certify", "--manifold", "sphere", "--field", "d-phi", "--p0", "1,0.2", "--q0", "1.6,0.9", "--T", "1", "--samples", "11"]);
    assert_eq!(ok.status.code(), Some(0));

    assert_eq!(gronwall(&["certify", "--manifold", "torus", "--field", "unit-y", "--p0", "0,0", "--q0", "1,0", "--T", "1"]).status.code(), Some(1));
    assert_eq!(gronwall(&["certify", "--manifold", "euclidean(2)", "--field", "unit-y", "--p0", "0,0,0", "--q0", "1,0", "--T", "1"]).status.code(), Some(1));
    assert_eq!(gronwall(&["certify", "--manifold", "euclidean(2)", "--field", "unit-y", "--p0", "0,0", "--q0", "1,0", "--T", "1", "--strategy", "global"]).status.code(), Some(1));
}

#[test]
fn certify_writes_artifacts_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = gronwall(&[
        "certify", "--manifold", "euclidean(2)", "--field", "0, exp(1 - 1/x^2)", "--p0", "-1,0.3", "--q0", "0.5,0.3", "--T", "1",
        "--strategy", "curve-tube", "--seeds", "-1,0.3;0.5,0.3", "--samples", "21", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["strategy"], "curve-tube");
    assert_eq!(doc["T"], 1.0);
    assert_eq!(doc["times"].as_array().unwrap().len(), 21);
    assert!(doc["first_violation"].is_null());
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(saved, doc);
    for name in ["trajectory_p.csv", "trajectory_q.csv"] {
        assert_eq!(fs::read_to_string(dir.path().join(name)).unwrap().lines().count(), 22);
    }
}

#[test]
fn config_file_sets_the_time_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"time_samples": 7, "integrator": {"rel_tol": 1e-10}}"#).unwrap();
    let out = gronwall(&[
        "certify", "--manifold", "poincare-disk", "--field", "-y, x", "--p0", "0.1,0", "--q0", "0.4,0.2", "--T", "1",
        "--config", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["times"].as_array().unwrap().len(), 7);

    fs::write(&path, "{not json").unwrap();
    let bad = gronwall(&["distance", "--manifold", "euclidean(2)", "--p", "0,0", "--q", "1,0", "--config", path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn reproduce_writes_its_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = gronwall(&["reproduce", "euclidean-linear", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    for name in ["certificate.json", "trajectory_p.csv", "trajectory_q.csv", "lengths.csv", "summary.txt"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("PASS") && !summary.contains("FAIL"));
}
