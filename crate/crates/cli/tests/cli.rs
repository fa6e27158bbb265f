use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jdsvd")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn diag_mtx(dir: &std::path::Path, n: usize) -> PathBuf {
    let mut s = format!("%%MatrixMarket matrix coordinate real general\n{n} {n} {n}\n");
    for i in 1..=n {
        s.push_str(&format!("{i} {i} {i}.0\n"));
    }
    let p = dir.join(format!("diag{n}.mtx"));
    std::fs::write(&p, s).unwrap();
    p
}

#[test]
fn solve_diagonal_prints_two() {
    let m = data("diag3.mtx");
    let o = run(&["solve", "--matrix", m.to_str().unwrap(), "--tau", "1.9", "--num", "1", "--variant", "rh"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let theta: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("triplet 0: theta = "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((theta - 2.0).abs() < 1e-10);
    assert!(out.contains("I_out = ") && out.contains("I_in = "));
}

#[test]
fn solve_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = data("diag3.mtx");
    let h = dir.path().join("h.csv");
    let r = dir.path().join("r.csv");
    let v = dir.path().join("v.csv");
    let o = run(&[
        "solve",
        "--matrix",
        m.to_str().unwrap(),
        "--tau",
        "1.9",
        "--num",
        "2",
        "--history-out",
        h.to_str().unwrap(),
        "--result-out",
        r.to_str().unwrap(),
        "--vectors-out",
        v.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(jdsvd::history::read_results_csv(&r).unwrap().len(), 2);
    assert!(!jdsvd::history::read_history_csv(&h).unwrap().records.is_empty());
    assert_eq!(jdsvd::history::read_vectors(&v).unwrap().len(), 2);
}

#[test]
fn missing_file_exits_one() {
    let o = run(&["solve", "--matrix", "/nonexistent/a.mtx", "--tau", "1.0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn bad_flags_exit_one() {
    let m = data("diag3.mtx");
    let m = m.to_str().unwrap();
    assert_eq!(run(&["solve", "--matrix", m, "--tau", "1.0", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--matrix", m, "--tau", "-1.0"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--matrix", m, "--tau", "1.0", "--eps-tilde", "2"]).status.code(), Some(1));
}

#[test]
fn non_convergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let m = diag_mtx(dir.path(), 60);
    let o = run(&["solve", "--matrix", m.to_str().unwrap(), "--tau", "30.4", "--num", "3", "--max-outer", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_diagonal_passes() {
    let dir = tempfile::tempdir().unwrap();
    let m = data("diag3.mtx");
    let out = dir.path().join("verify.csv");
    let o = run(&[
        "verify",
        "--matrix",
        m.to_str().unwrap(),
        "--tau",
        "1.9",
        "--num",
        "2",
        "--verify-out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.starts_with(jdsvd::diagnostics::VERIFY_HEADER));
}

#[test]
fn verify_refuses_large_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let m = diag_mtx(dir.path(), 700);
    let o = run(&["verify", "--matrix", m.to_str().unwrap(), "--tau", "350.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cap"));
}

#[test]
fn mimic_diagonal_table() {
    let m = data("diag3.mtx");
    for extra in [None, Some("--concurrent")] {
        let mut args = vec!["mimic", "--matrix", m.to_str().unwrap(), "--tau", "1.9"];
        args.extend(extra);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0));
        let out = stdout(&o);
        assert!(out.contains("iter-exact") && out.contains("eps=1e-3") && out.contains("eps=1e-4"));
        assert_eq!(out.matches("I_out within tolerance = true").count(), 2);
    }
}
