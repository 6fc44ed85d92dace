//! End-to-end runs of the `fgac` binary on the bundled data.

use std::path::PathBuf;
use std::process::{Command, Output};

fn data(rel: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    root.join(rel).to_string_lossy().into_owned()
}

fn fgac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fgac")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn schema_prints_ddl() {
    let o = fgac(&["schema", "--model", &data("university.json")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("CREATE TABLE Enrolment"), "{out}");
}

#[test]
fn compile_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<String> = (0..2)
        .map(|i| {
            let p = dir.path().join(format!("q6_{i}.sql"));
            let o = fgac(&[
                "compile",
                "--model",
                &data("university.json"),
                "--policy",
                &data("policies/SecVGU2.json"),
                "--query",
                &data("queries/q6.sql"),
                "--registry",
                &data("registry.json"),
                "-o",
                p.to_str().unwrap(),
            ]);
            assert_eq!(o.status.code(), Some(0));
            std::fs::read_to_string(p).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert!(outs[0].contains("CREATE PROCEDURE SecQuery_SecVGU2_"));
    assert!(outs[0].contains("CREATE FUNCTION AuthFunc_SecVGU2_Enrolment"));
}

#[test]
fn optimize_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = fgac(&[
        "optimize",
        "--model",
        &data("university.json"),
        "--policy",
        &data("policies/SecVGU1.json"),
        "--query",
        &data("queries/q4.sql"),
        "--facts",
        &data("facts/oldest_lecturer.json"),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = stdout(&o);
    assert!(report.starts_with("TEMP1/Lecturer\tStudent:age\t"), "{report}");
    assert!(report.contains("\tunsat\t") && report.trim_end().ends_with("GUARDED"), "{report}");
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 2);
}

#[test]
fn prove_case1_under_second_policy_is_sat() {
    let o = fgac(&[
        "prove",
        "--model",
        &data("university.json"),
        "--policy",
        &data("policies/SecVGU2.json"),
        "--resource",
        "Student:age",
        "--role",
        "Lecturer",
        "--facts",
        &data("facts/oldest_lecturer.json"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "sat");
}

#[test]
fn run_reports_denial_and_rows() {
    let common = [
        "run",
        "--model",
        &data("university.json"),
        "--policy",
        &data("policies/SecVGU1.json"),
        "--query",
        &data("queries/q4.sql"),
        "--scenario",
        &data("scenarios/vgu.json"),
        "--role",
        "Lecturer",
    ];
    let mut denied = common.to_vec();
    denied.extend(["--caller", "Huong"]);
    let o = fgac(&denied);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("security error"));
    let mut allowed = common.to_vec();
    allowed.extend(["--caller", "Manuel"]);
    let o = fgac(&allowed);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "COUNT(*)\n2\n");
}

#[test]
fn eval_prints_value() {
    let o = fgac(&[
        "eval",
        "--model",
        &data("university.json"),
        "--scenario",
        &data("scenarios/vgu.json"),
        "caller.students->includes(self)",
        "--bind",
        "caller=Lecturer:Huong",
        "--bind",
        "self=Student:Thanh",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "true");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(fgac(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(fgac(&["prove"]).status.code(), Some(2));
    assert_eq!(fgac(&["schema"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let o = fgac(&["schema", "--model", "/nonexistent/model.json"]);
    assert_eq!(o.status.code(), Some(1));
}
