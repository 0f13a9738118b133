use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singular-pq"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn listed_files(m: &Value) -> Vec<String> {
    m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap().to_owned()).collect()
}

fn files_on_disk(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    out.retain(|p| p != "manifest.json");
    out.sort();
    out
}

#[test]
fn torsion_csv_matches_parabola() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &["oracle-torsion", "--problem.p=2", "--problem.q=2", "--problem.extent=2", "--mesh.n=64", "--mesh.grading=1", "--output.dir=t"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("t/fields/torsion_oracle.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let x = cols[1] - 1.0;
        assert!((cols[3] - (1.0 - x * x) / 4.0).abs() <= 1e-10);
        rows += 1;
    }
    assert_eq!(rows, 65);
}

#[test]
fn threshold_beta_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["solve", "--problem.beta=2", "--output.dir=e"]);
    assert_eq!(out.status.code(), Some(1));
    let record: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("e/error.json")).unwrap()).unwrap();
    assert_eq!(record["kind"], "config");
    assert!(record["message"].as_str().unwrap().contains("β = p"));
    assert_eq!(listed_files(&manifest(&tmp.path().join("e"))), vec!["error.json"]);
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["solve", "--problem.nosuch=1"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["solve", "--config", "missing.toml"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn failed_check_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    // a slope tolerance no fit can meet
    let out = run(tmp.path(), &["probe-regime", "--mesh.n=1024", "--params.slope_tol=1e-9", "--output.dir=f"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(manifest(&tmp.path().join("f"))["status"], "check-failed");
}

#[test]
fn repeated_runs_are_identical_and_fully_listed() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.toml"),
        "[problem]\np = 3.0\nq = 2.0\ndelta = 1.0\nbeta = 1.0\n\n[mesh]\nn = 512\n\n[output]\ndir = \"runs/c\"\n",
    )
    .unwrap();
    for _ in 0..2 {
        let out = run(tmp.path(), &["continue", "--config", "c.toml", "--jobs", "2"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b) = (tmp.path().join("runs/c"), tmp.path().join("runs/c-v2"));
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["payload_sha256"], mb["payload_sha256"]);
    for rel in listed_files(&ma) {
        assert_eq!(fs::read(a.join(&rel)).unwrap(), fs::read(b.join(&rel)).unwrap(), "{rel}");
    }
    let listed = listed_files(&ma);
    assert_eq!(listed, files_on_disk(&a));
    assert!(ma["wall_times_s"]["total"].as_f64().unwrap() >= 0.0);
    // K = 4 gives five (ε, sup) rows
    let csv = fs::read_to_string(a.join("plotdata/continuation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
}

#[test]
fn sobolev_bundle_has_a_row_per_level_and_power() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &[
            "probe-sobolev",
            "--problem.delta=2",
            "--problem.beta=0.5",
            "--params.levels=[512, 1024, 2048]",
            "--output.dir=s",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(tmp.path().join("s/plotdata/sobolev.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    let verdict: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("s/verdicts/sobolev.json")).unwrap()).unwrap();
    assert_eq!(verdict["verdict"], "pass");
}

#[test]
fn verify_all_passes_with_default_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["verify-all"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS 0") || l.starts_with("PASS 1")).count(), 12);
    let doc: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("runs/verify-all/verdicts/acceptance.json")).unwrap()).unwrap();
    assert_eq!(doc["criteria"].as_array().unwrap().len(), 12);
}
