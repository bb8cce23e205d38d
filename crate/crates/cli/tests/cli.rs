use std::path::Path;
use std::process::{Command, Output};

use reeb_gdnf::emit::sha256_hex;
use serde_json::Value;

fn reeb(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reeb-gdnf"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SWAPPED_P3: &str = r#"
name = "P3-swapped"

[c1]
expr = "1/(x^2+1) - sin(exp(x^2))/(x^2+1)^2"
neg_inf = { limit = 0.0, tail = "AccumulatingFromAbove" }
pos_inf = { limit = 0.0, tail = "AccumulatingFromAbove" }

[c2]
expr = "-1/(x^2+1)"
neg_inf = { limit = 0.0, tail = "Finite" }
pos_inf = { limit = 0.0, tail = "Finite" }
"#;

#[test]
fn classify_bundled_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = reeb(&["classify", "--fixture", "P3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("gdnf.json"));
    assert_eq!(doc["pattern"], "P1_2_3");
    assert!(dir.path().join("gdnf.dot").exists());
}

#[test]
fn swapped_spec_exits_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("swapped.toml");
    std::fs::write(&spec, SWAPPED_P3).unwrap();
    let out_dir = dir.path().join("out");
    let out = reeb(&["classify", spec.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    let err = read_json(&out_dir.join("error.json"));
    assert!(err["witness_x"].is_number(), "{err}");
}

#[test]
fn compactify_reports_invariance() {
    let dir = tempfile::tempdir().unwrap();
    let out = reeb(&["compactify", "--fixture", "P4"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("compactified.json")).unwrap();
    assert!(text.contains("Isomorphic"), "{text}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = reeb(&["classify", "--fixture", "P5"], dir.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 3);
    for name in names {
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs between runs");
    }
}

#[test]
fn manifest_hashes_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = reeb(&["check", "--fixture", "P2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = read_json(&dir.path().join("manifest.json"));
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let bytes = std::fs::read(dir.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
}

#[test]
fn window_dependent_pattern_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let out = reeb(&["classify", "--fixture", "window-artifact"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    std::fs::write(&spec, "name = \"bad\"\n[c1]\nexpr = \"x +\"\n").unwrap();
    let out = reeb(&["analyze", spec.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    let out = reeb(&["classify", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
