use std::path::{Path, PathBuf};
use std::process::Command;

use mrdt_cli::{cmd_replay, failure_kind, fuzz, shrink_same_failure, FuzzConfig, Trace};
use mrdt_core::Mode;

fn mrdt(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mrdt")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../fixtures/{name}.trace"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let args = [
            "fuzz",
            "--datatype",
            "orset",
            "--iters",
            "40",
            "--seed",
            "9",
            "--out",
            path(out),
        ];
        assert_eq!(mrdt(&args).0, 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (c, d) = (dir.path().join("c.json"), dir.path().join("d.json"));
    for out in [&c, &d] {
        let args = [
            "vc",
            "--datatype",
            "ewflag",
            "--cases",
            "50",
            "--seed",
            "3",
            "--out",
            path(out),
        ];
        assert_eq!(mrdt(&args).0, 0);
    }
    assert_eq!(std::fs::read(&c).unwrap(), std::fs::read(&d).unwrap());
}

#[test]
fn fuzzed_failure_replays_to_the_same_report() {
    let mut cfg = FuzzConfig::new("ewflag-buggy", Mode::Mrdt);
    cfg.iters = 200;
    let report = fuzz(&cfg).unwrap();
    assert_eq!(report.exit_code(), 1);
    let first = report.first_failure.unwrap();
    let trace = Trace::parse(&first.trace).unwrap();
    let again = cmd_replay(&trace).unwrap();
    let replayed = again.first_failure.unwrap();
    assert_eq!(replayed.failure, first.failure);
    assert_eq!(replayed.iteration, first.iteration);

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("fail.trace");
    trace.write(&file).unwrap();
    assert_eq!(mrdt(&["replay", path(&file)]).0, 1);
}

#[test]
fn empty_executions_pass() {
    let mut cfg = FuzzConfig::new("counter", Mode::Mrdt);
    cfg.events = 0;
    cfg.iters = 5;
    let report = fuzz(&cfg).unwrap();
    assert!(report.passed());
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn shipped_fixtures_replay() {
    for name in ["fig3", "fig4", "fig5"] {
        assert_eq!(mrdt(&["replay", path(&fixture(name))]).0, 0, "{name}");
    }
    assert_eq!(mrdt(&["replay", path(&fixture("fig12"))]).0, 1);
}

#[test]
fn shrinking_a_passing_trace_is_an_error() {
    let t = Trace::read(&fixture("fig4")).unwrap();
    assert!(shrink_same_failure(&t).is_err());
    assert_eq!(mrdt(&["shrink", path(&fixture("fig4"))]).0, 2);
}

#[test]
fn shrinking_is_idempotent() {
    let t = Trace::read(&fixture("fig12")).unwrap();
    let once = shrink_same_failure(&t).unwrap();
    assert!(once.steps.len() <= t.steps.len());
    assert_eq!(failure_kind(&once), failure_kind(&t));
    let twice = shrink_same_failure(&once).unwrap();
    assert_eq!(twice.to_text(), once.to_text());
}

#[test]
fn bad_input_exits_with_usage_code() {
    assert_eq!(mrdt(&["fuzz", "--datatype", "no-such-type"]).0, 2);
    assert_eq!(mrdt(&["fuzz", "--datatype", "counter", "--iters", "0"]).0, 2);
    assert_eq!(
        mrdt(&["vc", "--datatype", "orset", "--mode", "crdt", "--cases", "10"]).0,
        0
    );
    assert_eq!(mrdt(&["frobnicate"]).0, 2);
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.trace");
    let text = std::fs::read_to_string(fixture("fig3")).unwrap();
    let cut: Vec<&str> = text.lines().collect();
    std::fs::write(&broken, cut[..cut.len() - 1].join("\n")).unwrap();
    assert_eq!(mrdt(&["replay", path(&broken)]).0, 2);
}

#[test]
fn crdt_mode_rejects_datatypes_without_binary_merge() {
    let (code, _) = mrdt(&["vc", "--datatype", "rwset", "--mode", "crdt", "--cases", "10"]);
    assert_eq!(code, 2);
}
