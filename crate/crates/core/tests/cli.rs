//! Exit-status contract of the binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_localworlds")).args(args).env("LOCALWORLDS_OUT", out).output().unwrap()
}

fn path(rel: &str) -> String {
    root().join(rel).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "--scenario", &path("scenarios/epr.scn"), "--n", "100"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("ZZ product = +1 in 100% of meetings"));
    let trace = dir.path().join("epr.trace.jsonl");
    let csv = std::fs::read_to_string(dir.path().join("epr.stats.csv")).unwrap();
    assert!(csv.starts_with("kind,event,events,outcomes,count,fraction,born"));
    let o = run(&["audit", trace.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("common cause S"));
    let o = run(&["audit", trace.to_str().unwrap(), "--scenario", &path("scenarios/epr.scn")], dir.path());
    // the file says N = 1000, the trace was run with 100
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fixtures_fail_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["audit", &path("crates/core/tests/fixtures/epr_leak_record.trace.jsonl")], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("overall: FAIL"));
}

#[test]
fn corrupt_trace_fails_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"type\": \"nonsense\"}\n").unwrap();
    assert_eq!(run(&["audit", bad.to_str().unwrap()], dir.path()).status.code(), Some(1));
}

#[test]
fn usage_and_file_errors_give_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&[], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["run"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["run", "--scenario", "/nonexistent.scn"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["audit", "/nonexistent.jsonl"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["hv-search", "--spec", &path("specs/ghz.toml"), "--mode", "sideways"], dir.path()).status.code(), Some(2));
    let invalid = dir.path().join("invalid.scn");
    std::fs::write(&invalid, "name = \"x\"\nn = 0\nsystems = []\n").unwrap();
    assert_eq!(run(&["run", "--scenario", invalid.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn hv_search_modes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = path("specs/ghz.toml");
    let o = run(&["hv-search", "--spec", &spec], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("UNSAT, 64 searched"));
    let o = run(&["hv-search", "--spec", &spec, "--mode", "divergent"], dir.path());
    assert!(stdout(&o).starts_with("UNSAT, 4096 searched"));
    let o = run(&["hv-search", "--spec", &spec, "--mode", "multivalued", "--out", dir.path().to_str().unwrap()], dir.path());
    assert!(stdout(&o).starts_with("SAT"));
    assert!(dir.path().join("ghz.multivalued.json").exists());
    let o = run(&["hv-search", "--spec", &spec, "--mode", "divergent-5", "--rule", "independent"], dir.path());
    assert_eq!(o.status.code(), Some(1), "size guard");
}

#[test]
fn no_signaling_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "no-signaling",
            "--scenario",
            &path("scenarios/epr.scn"),
            "--other",
            &path("scenarios/epr_remote_x.scn"),
            "--local",
            "A",
            "--n",
            "50",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
}

#[test]
fn cascade_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["demo-cascade"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with('E')).count(), 6);
    let o = run(&["demo-cascade", "--v", "0"], dir.path());
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with('E')).count(), 2);
}
