//! The shipped figure traces are exactly what recording these schedules
//! produces. Set MRDT_WRITE_FIXTURES=1 to regenerate them.

use std::path::PathBuf;

use mrdt_cli::{record, Step, Trace, TraceHeader};
use mrdt_core::{Mode, Op, ReplicaId, Transition};

fn r(n: u32) -> ReplicaId {
    ReplicaId(n)
}

fn branch(new: u32, from: u32) -> Step {
    Step::new(Transition::CreateBranch {
        new: r(new),
        from: r(from),
    })
}

fn apply(rep: u32, op: Op, label: &str) -> Step {
    Step::labelled(
        Transition::Apply {
            r: r(rep),
            op,
            ts: None,
        },
        label,
    )
}

fn merge(r1: u32, r2: u32, label: &str) -> Step {
    Step::labelled(Transition::Merge { r1: r(r1), r2: r(r2) }, label)
}

fn read(rep: u32) -> Step {
    Step::new(Transition::Query {
        r: r(rep),
        q: Op::new("rd"),
        expected: None,
    })
}

fn header(spec: &str) -> TraceHeader {
    TraceHeader {
        spec_name: spec.into(),
        seed: 0,
        alphabet: "a,b,c,d,e".into(),
        mode: Mode::Mrdt,
        iteration: None,
    }
}

fn add(x: &str) -> Op {
    Op::with_arg("add", x)
}

fn rem(x: &str) -> Op {
    Op::with_arg("rem", x)
}

pub fn figures() -> Vec<(&'static str, Trace)> {
    let fig3 = vec![
        branch(1, 0),
        apply(0, rem("a"), "e1"),
        apply(1, add("a"), "e2"),
        merge(0, 1, "v3"),
        read(0),
    ];
    let fig4 = vec![
        branch(1, 0),
        apply(0, add("a"), "e1 v1"),
        apply(1, rem("a"), "e2 v2"),
        merge(1, 0, "v4"),
        apply(0, rem("a"), "e3 v3"),
        merge(0, 1, "v5"),
        read(0),
    ];
    let fig5 = vec![
        branch(1, 0),
        apply(0, add("a"), "e1 v1"),
        apply(1, add("b"), "e2 v2"),
        branch(2, 0),
        apply(2, add("c"), "e3 v3"),
        branch(3, 1),
        apply(3, add("d"), "e4 v4"),
        merge(2, 1, "v5"),
        merge(3, 0, "v6"),
        merge(2, 3, "v7"),
        read(2),
    ];
    let en = || Op::new("enable");
    let dis = || Op::new("disable");
    let fig12 = vec![
        branch(1, 0),
        apply(0, en(), "e1 v1"),
        apply(1, en(), "e2 v2"),
        apply(1, dis(), "e3 v3"),
        branch(2, 1),
        merge(1, 0, "v4"),
        apply(0, dis(), "e4 v5"),
        branch(3, 0),
        merge(0, 1, "v6"),
        merge(3, 2, "v7"),
    ];
    [
        ("fig3", "orset", fig3),
        ("fig4", "orset", fig4),
        ("fig5", "orset", fig5),
        ("fig12", "ewflag-buggy", fig12),
    ]
    .into_iter()
    .map(|(name, spec, steps)| (name, record(header(spec), &steps).unwrap()))
    .collect()
}

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn shipped_fixtures_match_their_schedules() {
    let write = std::env::var_os("MRDT_WRITE_FIXTURES").is_some();
    for (name, trace) in figures() {
        let path = fixture_dir().join(format!("{name}.trace"));
        if write {
            trace.write(&path).unwrap();
        }
        let shipped = Trace::read(&path).unwrap();
        assert_eq!(shipped, trace, "{name}");
        assert_eq!(std::fs::read_to_string(&path).unwrap(), trace.to_text(), "{name}");
    }
}
