use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ricci-lab"))
        .args(args)
        .current_dir(cwd)
        .env("RICCI_LAB_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lists_bundled_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["list-scenarios"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["euclidean-calibration", "sphere-shrinker", "torus-bumpy"] {
        assert!(text.lines().any(|l| l == name), "{text}");
    }
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let source = ricci_harness::scenarios::source("euclidean-calibration").unwrap();
    let broken = source.replacen("dt", "dtt", 1);
    fs::write(dir.path().join("broken.toml"), broken).unwrap();
    let out = lab(&["run", "broken.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("flow"), "{err}");
    assert!(err.contains("dtt"), "{err}");
}

#[test]
fn unknown_target_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["run", "no-such-scenario"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_then_replay_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &["run", "euclidean-calibration", "--checks", "max_principle,harnack", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scenario = dir.path().join("o/euclidean-calibration");
    assert!(scenario.join("report.json").exists());
    assert!(scenario.join("tables/harnack.csv").exists());
    let inputs: Vec<_> = fs::read_dir(dir.path().join("o/inputs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(inputs.len(), 1);
    let hash = inputs[0].file_stem().unwrap().to_str().unwrap().to_string();

    let replay = lab(&["replay", &hash, "--out", "o"], dir.path());
    assert!(replay.status.success());
    assert!(stdout(&replay).contains("identical"), "{}", stdout(&replay));

    let summary = lab(&["report", "o"], dir.path());
    assert!(summary.status.success());
    assert!(stdout(&summary).contains("harnack"));
}

#[test]
fn fault_injection_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &["run", "euclidean-calibration", "--checks", "main_theorem", "--fault-inject", "main_theorem", "--out", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
}
