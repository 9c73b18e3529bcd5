use std::collections::BTreeSet;
use std::sync::Arc;

use mrdt_core::datatypes::{Alphabet, EwFlagBuggy, OrSet};
use mrdt_core::lincheck::{
    check_convergence, check_lca_lemma, check_replica_linearizable, check_version_linearizable, compute_lo,
    compute_stable_lo, enumerate_extensions, lo_irreflexive, partition_merge_events, LinOptions, LinRelation, Outcome,
};
use mrdt_core::{init_config, Configuration, Op, ReplicaId, Timestamp, Value};

fn r(n: u32) -> ReplicaId {
    ReplicaId(n)
}

fn t(n: u64) -> Timestamp {
    Timestamp(n)
}

fn set(ts: &[u64]) -> BTreeSet<Timestamp> {
    ts.iter().map(|n| Timestamp(*n)).collect()
}

fn orset() -> Configuration {
    init_config(Arc::new(OrSet::new(Alphabet::default())))
}

fn add(x: &str) -> Op {
    Op::with_arg("add", x)
}

fn rem(x: &str) -> Op {
    Op::with_arg("rem", x)
}

#[test]
fn concurrent_add_wins_over_remove() {
    let mut c = orset();
    c.create_branch(r(1), r(0)).unwrap();
    c.apply_op(r(0), rem("a"), None).unwrap();
    c.apply_op(r(1), add("a"), None).unwrap();
    c.merge_replicas(r(0), r(1)).unwrap();
    let read = c.query_replica(r(0), &Op::new("rd")).unwrap();
    assert_eq!(read, Value::set_of([Value::str("a")]));
    let lo = compute_lo(&c).unwrap();
    assert_eq!(lo.pairs, BTreeSet::from([(t(1), t(2))]));
}

#[test]
fn intermediate_merge_needs_local_event_first() {
    let mut c = orset();
    c.create_branch(r(1), r(0)).unwrap();
    let (v1, _) = c.apply_op(r(0), add("a"), None).unwrap();
    c.apply_op(r(1), rem("a"), None).unwrap();
    let v4 = c.merge_replicas(r(1), r(0)).unwrap();
    let (v3, _) = c.apply_op(r(0), rem("a"), None).unwrap();

    assert_eq!(c.find_lca(v3, v4).unwrap(), Some(v1));
    assert_eq!(c.version(v1).unwrap().events, set(&[1]));

    let p = partition_merge_events(&c, v3, v4).unwrap();
    assert_eq!(p.l1_local, set(&[3]));
    assert_eq!(p.l2_local, set(&[2]));
    assert_eq!(p.l1b, set(&[]));
    assert_eq!(p.l2b, set(&[2]));
    assert_eq!(p.ltop_a, set(&[1]));

    // the earlier merge of v1 and v2 has empty b-sets
    let v2 = c.version(v4).unwrap().parents[0];
    let early = partition_merge_events(&c, v1, v2).unwrap();
    assert!(early.l1b.is_empty() && early.l2b.is_empty() && early.ltop_a.is_empty());

    c.merge_replicas(r(0), r(1)).unwrap();
    let verdict = check_replica_linearizable(&c, r(0), &LinOptions::default()).unwrap();
    let order: Vec<u64> = verdict.witness.unwrap().iter().map(|e| e.ts.0).collect();
    assert_eq!(order, [2, 1, 3]);
}

#[test]
fn overwritten_rc_pairs_are_dropped() {
    let mut c = orset();
    c.create_branch(r(1), r(0)).unwrap();
    c.apply_op(r(0), add("a"), None).unwrap(); // e1
    c.apply_op(r(1), add("a"), None).unwrap(); // e2
    c.apply_op(r(0), rem("a"), None).unwrap(); // e3
    c.apply_op(r(1), rem("a"), None).unwrap(); // e4
    c.merge_replicas(r(0), r(1)).unwrap();
    let lo = compute_lo(&c).unwrap();
    assert_eq!(lo.pairs, BTreeSet::from([(t(1), t(3)), (t(2), t(4))]));
    assert!(lo_irreflexive(&lo));

    let events: Vec<_> = c.events().values().cloned().collect();
    let orders: Vec<Vec<u64>> = enumerate_extensions(&events, &lo, 100)
        .unwrap()
        .map(|s| s.iter().map(|e| e.ts.0).collect())
        .collect();
    assert!(orders.contains(&vec![1, 2, 3, 4]));
    assert!(orders.contains(&vec![1, 3, 2, 4]));

    let stable = compute_stable_lo(&c).unwrap();
    assert!(lo.pairs.is_subset(&stable.pairs));
    assert!(lo_irreflexive(&stable));
}

#[test]
fn criss_cross_merge_resolves_potential_lcas() {
    let mut c = orset();
    c.create_branch(r(1), r(0)).unwrap();
    let (ve1, _) = c.apply_op(r(0), add("a"), None).unwrap();
    let (ve2, _) = c.apply_op(r(1), add("b"), None).unwrap();
    c.create_branch(r(2), r(0)).unwrap();
    c.apply_op(r(2), add("c"), None).unwrap();
    c.create_branch(r(3), r(1)).unwrap();
    c.apply_op(r(3), add("d"), None).unwrap();
    let v5 = c.merge_replicas(r(2), r(1)).unwrap();
    let v6 = c.merge_replicas(r(3), r(0)).unwrap();

    assert_eq!(c.find_lca(v5, v6).unwrap(), None);
    assert_eq!(c.potential_lcas(v5, v6).unwrap(), vec![ve1, ve2]);
    let (state, events) = c.resolve_lca_state(v5, v6).unwrap();
    assert_eq!(events, set(&[1, 2]));
    let tag = |x: &str, n: i64| Value::pair(Value::str(x), Value::Int(n));
    assert_eq!(state, Value::set_of([tag("a", 1), tag("b", 2)]));

    c.merge_replicas(r(2), r(3)).unwrap();
    check_lca_lemma(&c).unwrap();
    check_convergence(&c).unwrap();
}

#[test]
fn buggy_flag_diverges_and_is_not_linearizable() {
    let mut c = init_config(Arc::new(EwFlagBuggy));
    let en = Op::new("enable");
    let dis = Op::new("disable");
    c.create_branch(r(1), r(0)).unwrap();
    c.apply_op(r(0), en.clone(), None).unwrap();
    c.apply_op(r(1), en, None).unwrap();
    c.apply_op(r(1), dis.clone(), None).unwrap();
    c.create_branch(r(2), r(1)).unwrap();
    c.merge_replicas(r(1), r(0)).unwrap();
    c.apply_op(r(0), dis, None).unwrap();
    c.create_branch(r(3), r(0)).unwrap();
    let v6 = c.merge_replicas(r(0), r(1)).unwrap();
    let v7 = c.merge_replicas(r(3), r(2)).unwrap();

    let pair = |n: i64, f: bool| Value::pair(Value::Int(n), Value::Bool(f));
    assert_eq!(c.version(v6).unwrap().state, pair(2, true));
    assert_eq!(c.version(v7).unwrap().state, pair(2, false));
    let d = check_convergence(&c).unwrap_err();
    assert_eq!((d.v1, d.v2), (v6, v7));

    let lo = compute_lo(&c).unwrap();
    let verdict = check_version_linearizable(&c, v6, &lo, &LinOptions::default()).unwrap();
    assert_eq!(verdict.outcome, Outcome::NotLinearizable);
}

#[test]
fn fresh_configuration_is_linearizable_with_empty_witness() {
    let c = orset();
    let v = check_replica_linearizable(&c, r(0), &LinOptions::default()).unwrap();
    assert_eq!(v.outcome, Outcome::Linearizable);
    assert_eq!(v.witness, Some(vec![]));
}

#[test]
fn extension_counts() {
    let mut c = orset();
    for x in ["a", "b", "c"] {
        c.apply_op(r(0), add(x), None).unwrap();
    }
    let events: Vec<_> = c.events().values().cloned().collect();
    let empty = LinRelation::default();
    assert_eq!(enumerate_extensions(&events, &empty, 100).unwrap().count(), 6);
    assert_eq!(enumerate_extensions(&events, &empty, 4).unwrap().count(), 4);
    let chain = LinRelation {
        over: set(&[1, 2, 3]),
        pairs: BTreeSet::from([(t(1), t(2)), (t(2), t(3))]),
    };
    let only: Vec<Vec<u64>> = enumerate_extensions(&events, &chain, 100)
        .unwrap()
        .map(|s| s.iter().map(|e| e.ts.0).collect())
        .collect();
    assert_eq!(only, vec![vec![1, 2, 3]]);
    assert!(enumerate_extensions(&events, &empty, 0).is_err());
    let cyclic = LinRelation {
        over: set(&[1, 2]),
        pairs: BTreeSet::from([(t(1), t(2)), (t(2), t(1))]),
    };
    assert!(!lo_irreflexive(&cyclic));
    assert!(lo_irreflexive(&LinRelation::default()));
}
