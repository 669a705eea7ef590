//! The `probterm` binary: exit codes, output formats and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../corpus/{name}"))
}

fn probterm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_probterm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn prove_exit_codes() {
    let r1 = corpus("r1.ptrs");
    let ok = probterm(&["prove", path(&r1), "--goal", "ast", "--check"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).starts_with("AST\n"));
    assert!(String::from_utf8_lossy(&ok.stderr).contains("proof check: ok"));

    let maybe = probterm(&["prove", path(&corpus("r2.ptrs")), "--goal", "ast"]);
    assert_eq!(maybe.status.code(), Some(1));
    assert!(stdout(&maybe).starts_with("MAYBE"));

    let missing = probterm(&["prove", "/nonexistent.ptrs", "--goal", "ast"]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_goal = probterm(&["prove", path(&r1), "--goal", "past"]);
    assert_eq!(bad_goal.status.code(), Some(2));
}

#[test]
fn malformed_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.ptrs");
    std::fs::write(&f, "(RULES g -> { 1/2 : 0 } )").unwrap();
    let o = probterm(&["prove", path(&f), "--goal", "ast"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn json_proof_is_byte_identical_across_runs() {
    let f = corpus("r_alg.ptrs");
    let args = ["prove", path(&f), "--goal", "bast", "--proof", "json"];
    let a = probterm(&args);
    let b = probterm(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let (verdict, json) = text.split_once('\n').unwrap();
    assert_eq!(verdict, "bAST");
    let doc = probterm::proof::ProofDoc::from_json(json).unwrap();
    probterm::proof::check_proof(&doc).unwrap();
}

#[test]
fn simulate_writes_csv_and_exact_mass() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    let o = probterm(&[
        "simulate",
        path(&corpus("r1.ptrs")),
        "--runs",
        "500",
        "--seed",
        "3",
        "--csv",
        path(&csv),
        "--exact",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("terminated"));
    assert!(out.contains("175/256"), "{out}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 501);

    let again = probterm(&["simulate", path(&corpus("r1.ptrs")), "--runs", "500", "--seed", "3"]);
    assert_eq!(out.lines().next(), stdout(&again).lines().next());
}

#[test]
fn simulate_rejects_bad_priority() {
    let o = probterm(&["simulate", path(&corpus("r3.ptrs")), "--priority", "0,1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = probterm(&["simulate", path(&corpus("r3.ptrs")), "--runs", "50", "--priority", "2,1,3", "--rule-first"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn graph_prints_sccs_and_dot() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("g.dot");
    let o = probterm(&["graph", path(&corpus("r_alg.ptrs")), "--goal", "ast", "--dot", path(&dot)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("SCCs"));
    assert!(std::fs::read_to_string(&dot).unwrap().starts_with("digraph"));
}

#[test]
fn bench_exit_codes() {
    let empty = tempfile::tempdir().unwrap();
    let o = probterm(&["bench", path(empty.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 checks, 0 regressions"));

    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus("r1.ptrs"), dir.path().join("r1.ptrs")).unwrap();
    std::fs::write(dir.path().join("r1.expected"), "ast MAYBE\n").unwrap();
    let o = probterm(&["bench", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("1 regressions"));

    std::fs::write(dir.path().join("r1.expected"), "ast AST\n").unwrap();
    assert_eq!(probterm(&["bench", path(dir.path())]).status.code(), Some(0));
}
