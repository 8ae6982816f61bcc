use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn qml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qml"))
        .args(args)
        .env_remove("QML_SEED")
        .output()
        .expect("spawn qml")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct TempScript(PathBuf);

impl TempScript {
    fn new(tag: &str, body: &str) -> Self {
        let path = std::env::temp_dir().join(format!("qml-cli-{}-{tag}.qml", std::process::id()));
        std::fs::write(&path, body).unwrap();
        TempScript(path)
    }

    fn path(&self) -> &str {
        self.0.to_str().unwrap()
    }
}

impl Drop for TempScript {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

#[test]
fn teleport_runs_clean() {
    let o = qml(&["run", scenario("teleport.qml").to_str().unwrap(), "-p", "alpha=0.6", "-p", "beta=0.8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn blocked_inference_reports_its_line() {
    let o = qml(&["run", scenario("hardy_blocked.qml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(":17:") && err.contains("error:"), "{err}");
}

#[test]
fn missing_file_is_a_load_error() {
    let o = qml(&["run", "/nonexistent/nothing.qml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unbound_parameter_is_a_load_error() {
    let o = qml(&["run", scenario("teleport.qml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = qml(&["run", scenario("epr.qml").to_str().unwrap(), "-p", "nosuch=1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn underdetermined_audit_is_skipped() {
    let o = qml(&["audit", scenario("underdetermined.qml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("SKIP seed"));
}

#[test]
fn injected_fault_fails_the_audit() {
    let path = scenario("faults/impossible_outcome.qml");
    let clean = qml(&["run", path.to_str().unwrap()]);
    assert_eq!(clean.status.code(), Some(2));
    let faulty = qml(&["run", "--audit", "--fault", "skip-weak-born", path.to_str().unwrap()]);
    assert_eq!(faulty.status.code(), Some(4));
    assert!(stdout(&faulty).contains("FAIL"));
}

#[test]
fn failed_expectation_exits_one() {
    let s = TempScript::new(
        "expect",
        "system A : qubit;\nassume (A) |= |0>;\nexpect verifies (A) |= |1>;\n",
    );
    let o = qml(&["run", s.path()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL (line 3)"), "{}", stdout(&o));
}

#[test]
fn seed_comes_from_the_environment() {
    let s = TempScript::new(
        "seed",
        "ket k0 = |0>; ket k1 = |1>;\nsystem A : qubit;\nassume (A) |= |+>;\nmeasure A with {k0, k1} -> any;\n",
    );
    let with_env = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_qml"))
            .args(["run", "--trace", "structured", s.path()])
            .env("QML_SEED", seed)
            .output()
            .unwrap()
    };
    let flag = qml(&["run", "--trace", "structured", "--seed", "17", s.path()]);
    assert_eq!(stdout(&with_env("17")), stdout(&flag));
    let outcomes: std::collections::HashSet<String> =
        (0..16).map(|k| stdout(&with_env(&k.to_string()))).collect();
    assert!(outcomes.len() > 1, "sampling ignores the seed");
}

#[test]
fn possible_subcommand() {
    let s = TempScript::new("possible", "ket k0 = |0>; ket k1 = |1>;\nobservable Z on qubit = {k0, k1};\nsystem A : qubit;\nassume (A) |= |1>;\n");
    let o = qml(&["possible", s.path(), "A", "Z"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("certain"), "{}", stdout(&o));
}

#[test]
fn clap_usage_errors_exit_three() {
    assert_eq!(qml(&["run"]).status.code(), Some(3));
    assert_eq!(qml(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(qml(&["--help"]).status.code(), Some(0));
}

#[test]
fn explore_session() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_qml"))
        .args(["explore", scenario("epr.qml").to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"facts\nundo\nsystem E : qubit;\nassume (E) |= u;\nmeasure E with {u, v}\n  -> any;\nbogus;\nquit\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("qml> "));
    assert!(out.contains("...> "), "continuation prompt missing");
    assert!(out.contains("irreversible"));
    assert!(out.contains("certain: u"), "{out}");
    assert!(out.contains("error:"), "{out}");
}
