use std::fs;
use std::path::Path;
use std::process::Command;

use outstab::scenario::{builtin_scenario, OUT_DIR_ENV};

fn outstab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_outstab"))
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    fs::read(dir.join(file)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(file).display()))
}

#[test]
fn repeated_runs_write_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let st = outstab()
            .args(["run", "example3", "--horizon", "5", "--out"])
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(st.success());
    }
    for file in ["run_0.csv", "run_1.csv", "run_2.csv", "summary.json"] {
        assert_eq!(read(&a.path().join("example3"), file), read(&b.path().join("example3"), file), "{file}");
    }
}

#[test]
fn csv_header_lists_states_adaptation_outputs_and_control() {
    let dir = tempfile::tempdir().unwrap();
    let st = outstab()
        .args(["run", "example3", "--horizon", "1", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    let text = String::from_utf8(read(&dir.path().join("example3"), "run_0.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x1,x2,w1,w2,y1,y2,u");
}

#[test]
fn scenario_file_matches_the_builtin_it_was_saved_from() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = builtin_scenario("comparison-finite-time").unwrap();
    sc.name = "from-file".into();
    let file = dir.path().join("scenario.json");
    fs::write(&file, sc.to_json()).unwrap();
    for arg in [file.to_str().unwrap(), "comparison-finite-time"] {
        let st = outstab().args(["run", arg, "--out"]).arg(dir.path()).status().unwrap();
        assert!(st.success());
    }
    assert_eq!(
        read(&dir.path().join("from-file"), "run_0.csv"),
        read(&dir.path().join("comparison-finite-time"), "run_0.csv")
    );
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let st = outstab().args(["run", "example1", "--horizon", "1"]).env(OUT_DIR_ENV, dir.path()).status().unwrap();
    assert!(st.success());
    assert!(dir.path().join("example1/summary.json").is_file());
    assert!(dir.path().join("example1/certification.json").is_file());
}

#[test]
fn certify_reports_pass_for_both_examples() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["example1", "example2"] {
        let out = outstab().args(["certify", name, "--out"]).arg(dir.path()).output().unwrap();
        assert!(out.status.success(), "{name}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("verdict: Pass"));
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| outstab().args(args).env(OUT_DIR_ENV, dir.path()).status().unwrap().code();
    assert_eq!(code(&["list"]), Some(0));
    assert_eq!(code(&["run", "no-such-scenario"]), Some(2));
    assert_eq!(code(&["run", "example1", "--dt", "-1"]), Some(2));
    assert_eq!(code(&["certify", "example3"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    // the uncompensated plant blows up
    assert_eq!(code(&["run", "example3-noadapt"]), Some(1));
}

#[test]
fn list_names_every_builtin() {
    let out = outstab().arg("list").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["example1", "example2", "example3", "example4", "comparison-fixed-time"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}
