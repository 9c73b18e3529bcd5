//! Linearization relation, merge-event partition and the linearizability,
//! convergence and LCA verdicts over store configurations.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::event::{Event, Op, ReplicaId, Timestamp};
use crate::spec::Mrdt;
use crate::store::{Configuration, StepOutcome, Transition, VersionId};
use crate::value::Value;

/// A relation over events, identified by timestamp.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinRelation {
    pub over: BTreeSet<Timestamp>,
    pub pairs: BTreeSet<(Timestamp, Timestamp)>,
}

impl LinRelation {
    pub fn contains(&self, a: Timestamp, b: Timestamp) -> bool {
        self.pairs.contains(&(a, b))
    }

    pub fn restrict(&self, s: &BTreeSet<Timestamp>) -> LinRelation {
        LinRelation {
            over: self.over.intersection(s).copied().collect(),
            pairs: self
                .pairs
                .iter()
                .filter(|(a, b)| s.contains(a) && s.contains(b))
                .copied()
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Fails when the rc relation, restricted to `ops`, has a cycle (so rc⁺
/// would be reflexive).
pub fn check_rc_acyclic(spec: &dyn Mrdt, ops: &[Op]) -> Result<()> {
    let n = ops.len();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| spec.rc(&ops[i], &ops[j])).collect())
        .collect();
    // 0 unvisited, 1 on stack, 2 done
    let mut mark = vec![0u8; n];
    for root in 0..n {
        if mark[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        mark[root] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&w) = succ[v].get(*next) {
                *next += 1;
                match mark[w] {
                    0 => {
                        mark[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => return Err(Error::RcCycle(ops[w].to_string())),
                    _ => {}
                }
            } else {
                mark[v] = 2;
                stack.pop();
            }
        }
    }
    Ok(())
}

fn distinct_ops(c: &Configuration) -> Vec<Op> {
    let mut ops: Vec<Op> = Vec::new();
    for e in c.events().values() {
        if !ops.contains(&e.op) {
            ops.push(e.op.clone());
        }
    }
    ops
}

/// For each event, the creation index of the earliest later event that sees
/// it and does not commute with it.
fn first_overwrite(c: &Configuration) -> BTreeMap<Timestamp, usize> {
    let spec = c.spec();
    let mut out = BTreeMap::new();
    for (before, after) in c.vis_pairs() {
        let (eb, ea) = (&c.events()[&before], &c.events()[&after]);
        if !spec.commutes(&eb.op, &ea.op) {
            let idx = c.creation_index(after).unwrap();
            out.entry(before)
                .and_modify(|m: &mut usize| *m = (*m).min(idx))
                .or_insert(idx);
        }
    }
    out
}

fn lo_with(c: &Configuration, stable: bool) -> Result<LinRelation> {
    let spec = c.spec();
    check_rc_acyclic(spec.as_ref(), &distinct_ops(c))?;
    let blocked = first_overwrite(c);
    let events: Vec<&Event> = c.events().values().collect();
    let mut rel = LinRelation {
        over: c.events().keys().copied().collect(),
        pairs: BTreeSet::new(),
    };
    for e1 in &events {
        for e2 in &events {
            if e1.ts == e2.ts || spec.commutes(&e1.op, &e2.op) {
                continue;
            }
            let edge = if c.vis(e1.ts, e2.ts) {
                true
            } else if c.concurrent(e1.ts, e2.ts) && spec.rc(&e1.op, &e2.op) {
                match blocked.get(&e2.ts) {
                    None => true,
                    Some(&idx) if stable => {
                        let horizon = c.creation_index(e1.ts).max(c.creation_index(e2.ts)).unwrap();
                        idx > horizon
                    }
                    Some(_) => false,
                }
            } else {
                false
            };
            if edge {
                rel.pairs.insert((e1.ts, e2.ts));
            }
        }
    }
    Ok(rel)
}

/// The linearization relation of a configuration: visibility between
/// non-commuting events, plus rc between concurrent non-commuting events
/// unless the rc-later event is seen by some non-commuting event of the
/// configuration.
pub fn compute_lo(c: &Configuration) -> Result<LinRelation> {
    lo_with(c, false)
}

/// The same relation with each pair fixed when both events first coexist:
/// the suppressing event must have been generated no later than the pair.
/// This never changes as the execution grows and contains `compute_lo`.
pub fn compute_stable_lo(c: &Configuration) -> Result<LinRelation> {
    lo_with(c, true)
}

/// Whether the transitive closure of `rel` has no self-pair.
pub fn lo_irreflexive(rel: &LinRelation) -> bool {
    let mut nodes: BTreeSet<Timestamp> = rel.over.clone();
    for (a, b) in &rel.pairs {
        nodes.insert(*a);
        nodes.insert(*b);
    }
    let mut indeg: BTreeMap<Timestamp, usize> = nodes.iter().map(|n| (*n, 0)).collect();
    for (_, b) in &rel.pairs {
        *indeg.get_mut(b).unwrap() += 1;
    }
    let mut ready: Vec<Timestamp> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut seen = 0;
    while let Some(n) = ready.pop() {
        seen += 1;
        for (_, b) in rel.pairs.range((n, Timestamp(0))..=(n, Timestamp(u64::MAX))) {
            let d = indeg.get_mut(b).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(*b);
            }
        }
    }
    seen == nodes.len()
}

/// Lazily enumerated topological orders of `events` under `rel`, in
/// lexicographic timestamp order, at most `cap` of them.
pub struct Extensions {
    events: Vec<Event>,
    preds: Vec<Vec<usize>>,
    cap: usize,
    emitted: usize,
    seq: Vec<usize>,
    placed: Vec<bool>,
    started: bool,
    done: bool,
}

pub fn enumerate_extensions(events: &[Event], rel: &LinRelation, cap: usize) -> Result<Extensions> {
    if cap == 0 {
        return Err(Error::ZeroCap);
    }
    let mut events = events.to_vec();
    events.sort();
    let preds = predecessor_lists(&events, rel);
    let n = events.len();
    Ok(Extensions {
        events,
        preds,
        cap,
        emitted: 0,
        seq: Vec::with_capacity(n),
        placed: vec![false; n],
        started: false,
        done: false,
    })
}

fn predecessor_lists(events: &[Event], rel: &LinRelation) -> Vec<Vec<usize>> {
    let index: BTreeMap<Timestamp, usize> = events.iter().enumerate().map(|(i, e)| (e.ts, i)).collect();
    let mut preds = vec![Vec::new(); events.len()];
    for (a, b) in &rel.pairs {
        if let (Some(&i), Some(&j)) = (index.get(a), index.get(b)) {
            preds[j].push(i);
        }
    }
    preds
}

impl Extensions {
    fn available(&self, i: usize) -> bool {
        !self.placed[i] && self.preds[i].iter().all(|&p| self.placed[p])
    }
}

impl Iterator for Extensions {
    type Item = Vec<Event>;

    fn next(&mut self) -> Option<Vec<Event>> {
        if self.done || self.emitted >= self.cap {
            return None;
        }
        let n = self.events.len();
        let mut from = if self.started {
            match self.seq.pop() {
                Some(i) => {
                    self.placed[i] = false;
                    i + 1
                }
                None => {
                    self.done = true;
                    return None;
                }
            }
        } else {
            self.started = true;
            0
        };
        loop {
            if self.seq.len() == n {
                self.emitted += 1;
                return Some(self.seq.iter().map(|&i| self.events[i].clone()).collect());
            }
            match (from..n).find(|&i| self.available(i)) {
                Some(i) => {
                    self.seq.push(i);
                    self.placed[i] = true;
                    from = 0;
                }
                None => match self.seq.pop() {
                    Some(i) => {
                        self.placed[i] = false;
                        from = i + 1;
                    }
                    None => {
                        self.done = true;
                        return None;
                    }
                },
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Linearizable,
    NotLinearizable,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub replica: Option<ReplicaId>,
    pub version: VersionId,
    pub expected: Value,
    pub events: BTreeSet<Timestamp>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinVerdict {
    pub outcome: Outcome,
    pub witness: Option<Vec<Event>>,
    pub violation: Option<Violation>,
    /// Extensions or search nodes examined.
    pub explored: usize,
    /// Sampled adjacent transpositions that changed the resulting state.
    pub transposition_mismatches: usize,
}

impl LinVerdict {
    pub fn is_linearizable(&self) -> bool {
        self.outcome == Outcome::Linearizable
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinOptions {
    /// Event counts up to this are searched exhaustively.
    pub exhaustive_bound: usize,
    /// Sampled extensions above the bound.
    pub budget: usize,
    pub seed: u64,
}

impl Default for LinOptions {
    fn default() -> Self {
        LinOptions {
            exhaustive_bound: 8,
            budget: 10_000,
            seed: 0,
        }
    }
}

/// Search the extensions of `lo` over the version's events for one whose
/// application to σ₀ reproduces the version's state.
pub fn check_version_linearizable(
    c: &Configuration,
    v: VersionId,
    lo: &LinRelation,
    opts: &LinOptions,
) -> Result<LinVerdict> {
    let version = c.version(v)?;
    let events: Vec<Event> = version.events.iter().map(|t| c.events()[t].clone()).collect();
    let target = &version.state;
    let spec = c.spec().as_ref();
    let preds = predecessor_lists(&events, lo);
    let fail = |explored, mismatches| LinVerdict {
        outcome: Outcome::NotLinearizable,
        witness: None,
        violation: Some(Violation {
            replica: None,
            version: v,
            expected: target.clone(),
            events: version.events.clone(),
        }),
        explored,
        transposition_mismatches: mismatches,
    };
    let found = |seq: Vec<usize>, explored, mismatches| LinVerdict {
        outcome: Outcome::Linearizable,
        witness: Some(seq.into_iter().map(|i| events[i].clone()).collect()),
        violation: None,
        explored,
        transposition_mismatches: mismatches,
    };

    if events.len() <= opts.exhaustive_bound.min(128) {
        let mut search = Search {
            spec,
            events: &events,
            preds: &preds,
            target,
            failed: HashSet::new(),
            seq: Vec::new(),
            explored: 0,
        };
        return Ok(if search.dfs(0, &spec.init())? {
            let seq = std::mem::take(&mut search.seq);
            found(seq, search.explored, 0)
        } else {
            fail(search.explored, 0)
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (v.0 as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut mismatches = 0;
    for k in 0..opts.budget {
        let Some(seq) = random_extension(&preds, &mut rng) else {
            return Ok(fail(k, mismatches));
        };
        let state = run(spec, &events, &seq)?;
        if &state == target {
            return Ok(found(seq, k + 1, mismatches));
        }
        if seq.len() >= 2 {
            let i = rng.gen_range(0..seq.len() - 1);
            let (a, b) = (seq[i], seq[i + 1]);
            if !preds[b].contains(&a) {
                let mut swapped = seq.clone();
                swapped.swap(i, i + 1);
                if run(spec, &events, &swapped)? != state {
                    mismatches += 1;
                }
            }
        }
    }
    Ok(LinVerdict {
        outcome: Outcome::Inconclusive,
        witness: None,
        violation: None,
        explored: opts.budget,
        transposition_mismatches: mismatches,
    })
}

/// Whether `seq` places every related pair of `rel` in order.
pub fn extends(seq: &[Event], rel: &LinRelation) -> bool {
    let pos: BTreeMap<Timestamp, usize> = seq.iter().enumerate().map(|(i, e)| (e.ts, i)).collect();
    rel.pairs.iter().all(|(a, b)| match (pos.get(a), pos.get(b)) {
        (Some(i), Some(j)) => i < j,
        _ => true,
    })
}

/// Like `check_version_linearizable`, but first searches the extensions of
/// `preferred`, a superset of `lo` (the stable relation). Its witnesses
/// follow the bottom-up sequence structure and are still extensions of
/// `lo`; the plain search under `lo` runs only when that finds nothing.
pub fn check_version_preferring(
    c: &Configuration,
    v: VersionId,
    lo: &LinRelation,
    preferred: &LinRelation,
    opts: &LinOptions,
) -> Result<LinVerdict> {
    let first = check_version_linearizable(c, v, preferred, opts)?;
    if first.witness.as_ref().is_some_and(|w| extends(w, lo)) {
        return Ok(first);
    }
    let mut second = check_version_linearizable(c, v, lo, opts)?;
    second.explored += first.explored;
    Ok(second)
}

fn run(spec: &dyn Mrdt, events: &[Event], seq: &[usize]) -> Result<Value> {
    let mut s = spec.init();
    for &i in seq {
        s = spec.apply(&s, &events[i])?;
    }
    Ok(s)
}

fn random_extension(preds: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let n = preds.len();
    let mut placed = vec![false; n];
    let mut seq = Vec::with_capacity(n);
    while seq.len() < n {
        let ready: Vec<usize> = (0..n)
            .filter(|&i| !placed[i] && preds[i].iter().all(|&p| placed[p]))
            .collect();
        let &i = ready.choose(rng)?;
        placed[i] = true;
        seq.push(i);
    }
    Some(seq)
}

struct Search<'a> {
    spec: &'a dyn Mrdt,
    events: &'a [Event],
    preds: &'a [Vec<usize>],
    target: &'a Value,
    failed: HashSet<(u128, Value)>,
    seq: Vec<usize>,
    explored: usize,
}

impl Search<'_> {
    fn dfs(&mut self, mask: u128, state: &Value) -> Result<bool> {
        self.explored += 1;
        let n = self.events.len();
        if self.seq.len() == n {
            return Ok(state == self.target);
        }
        if self.failed.contains(&(mask, state.clone())) {
            return Ok(false);
        }
        for i in 0..n {
            let bit = 1u128 << i;
            if mask & bit != 0 || self.preds[i].iter().any(|&p| mask & (1u128 << p) == 0) {
                continue;
            }
            let next = self.spec.apply(state, &self.events[i])?;
            self.seq.push(i);
            if self.dfs(mask | bit, &next)? {
                return Ok(true);
            }
            self.seq.pop();
        }
        self.failed.insert((mask, state.clone()));
        Ok(false)
    }
}

/// Linearizability of replica `r`'s head under the configuration's lo.
pub fn check_replica_linearizable(c: &Configuration, r: ReplicaId, opts: &LinOptions) -> Result<LinVerdict> {
    let lo = compute_lo(c)?;
    let stable = compute_stable_lo(c)?;
    let mut v = check_version_preferring(c, c.head(r)?, &lo, &stable, opts)?;
    if let Some(viol) = v.violation.as_mut() {
        viol.replica = Some(r);
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub v1: VersionId,
    pub v2: VersionId,
    pub state1: Value,
    pub state2: Value,
    pub events: BTreeSet<Timestamp>,
}

/// Versions with equal event sets must hold equal states. Returns the first
/// violating pair in version order.
pub fn check_convergence(c: &Configuration) -> std::result::Result<(), Divergence> {
    let mut first: BTreeMap<&BTreeSet<Timestamp>, VersionId> = BTreeMap::new();
    for v in c.versions() {
        match first.get(&v.events) {
            Some(&w) => {
                let s = &c.versions()[w.0].state;
                if *s != v.state {
                    return Err(Divergence {
                        v1: w,
                        v2: v.id,
                        state1: s.clone(),
                        state2: v.state.clone(),
                        events: v.events.clone(),
                    });
                }
            }
            None => {
                first.insert(&v.events, v.id);
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LcaViolation {
    pub v1: VersionId,
    pub v2: VersionId,
    pub lca: Vec<VersionId>,
}

fn lca_pair_ok(c: &Configuration, v1: VersionId, v2: VersionId) -> Result<bool> {
    let (a, b) = (c.version(v1)?, c.version(v2)?);
    let common: BTreeSet<Timestamp> = a.events.intersection(&b.events).copied().collect();
    Ok(c.lca_events(v1, v2)? == common)
}

/// For every version pair, the merge base carries exactly the common
/// events: the LCA's set when unique, the union over potential LCAs
/// otherwise.
pub fn check_lca_lemma(c: &Configuration) -> std::result::Result<(), LcaViolation> {
    let n = c.versions().len();
    for i in 0..n {
        for j in i..n {
            check_lca_pair(c, VersionId(i), VersionId(j))?;
        }
    }
    Ok(())
}

/// The lemma for pairs involving `v` only.
pub fn check_lca_lemma_for(c: &Configuration, v: VersionId) -> std::result::Result<(), LcaViolation> {
    for w in 0..c.versions().len() {
        check_lca_pair(c, VersionId(w), v)?;
    }
    Ok(())
}

fn check_lca_pair(c: &Configuration, v1: VersionId, v2: VersionId) -> std::result::Result<(), LcaViolation> {
    let violation = || LcaViolation {
        v1,
        v2,
        lca: c.potential_lcas(v1, v2).unwrap_or_default(),
    };
    match lca_pair_ok(c, v1, v2) {
        Ok(true) => Ok(()),
        _ => Err(violation()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Bucket {
    pub top: Timestamp,
    pub l1b: BTreeSet<Timestamp>,
    pub l2b: BTreeSet<Timestamp>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MergePartition {
    pub ltop: BTreeSet<Timestamp>,
    pub l1_local: BTreeSet<Timestamp>,
    pub l2_local: BTreeSet<Timestamp>,
    pub l1b: BTreeSet<Timestamp>,
    pub l2b: BTreeSet<Timestamp>,
    pub l1a: BTreeSet<Timestamp>,
    pub l2a: BTreeSet<Timestamp>,
    pub ltop_a: BTreeSet<Timestamp>,
    pub ltop_b: BTreeSet<Timestamp>,
    pub buckets: Vec<Bucket>,
}

fn before_top(lo: &LinRelation, e: Timestamp, top: Timestamp, local: &BTreeSet<Timestamp>) -> bool {
    lo.contains(e, top) || local.iter().any(|&m| lo.contains(e, m) && lo.contains(m, top))
}

/// Classify the events of a merge of `v1` and `v2` against the stable lo
/// restricted to the merged event set.
pub fn partition_merge_events(c: &Configuration, v1: VersionId, v2: VersionId) -> Result<MergePartition> {
    let lo = compute_stable_lo(c)?;
    partition_with(c, v1, v2, &lo)
}

pub fn partition_with(c: &Configuration, v1: VersionId, v2: VersionId, lo: &LinRelation) -> Result<MergePartition> {
    let (a, b) = (c.version(v1)?, c.version(v2)?);
    let ltop = c.lca_events(v1, v2)?;
    let merged: BTreeSet<Timestamp> = a.events.union(&b.events).copied().collect();
    let lo = lo.restrict(&merged);
    let l1_local: BTreeSet<Timestamp> = a.events.difference(&ltop).copied().collect();
    let l2_local: BTreeSet<Timestamp> = b.events.difference(&ltop).copied().collect();
    let side_b = |local: &BTreeSet<Timestamp>| -> BTreeSet<Timestamp> {
        local
            .iter()
            .filter(|&&e| ltop.iter().any(|&t| before_top(&lo, e, t, local)))
            .copied()
            .collect()
    };
    let l1b = side_b(&l1_local);
    let l2b = side_b(&l2_local);
    let ltop_a: BTreeSet<Timestamp> = ltop
        .iter()
        .filter(|&&t| l1b.iter().chain(l2b.iter()).any(|&e| lo.contains(e, t)))
        .copied()
        .collect();
    let ltop_b = ltop.difference(&ltop_a).copied().collect();
    let l1a = l1_local.difference(&l1b).copied().collect();
    let l2a = l2_local.difference(&l2b).copied().collect();

    let mut buckets = Vec::new();
    let (mut used1, mut used2) = (BTreeSet::new(), BTreeSet::new());
    for top in topological(&ltop_a, &lo) {
        let take = |local: &BTreeSet<Timestamp>, used: &mut BTreeSet<Timestamp>| {
            let got: BTreeSet<Timestamp> = local
                .iter()
                .filter(|e| !used.contains(*e) && before_top(&lo, **e, top, local))
                .copied()
                .collect();
            used.extend(got.iter().copied());
            got
        };
        let b1 = take(&l1_local, &mut used1);
        let b2 = take(&l2_local, &mut used2);
        buckets.push(Bucket { top, l1b: b1, l2b: b2 });
    }
    Ok(MergePartition {
        ltop,
        l1_local,
        l2_local,
        l1b,
        l2b,
        l1a,
        l2a,
        ltop_a,
        ltop_b,
        buckets,
    })
}

/// Kahn's order with timestamp tie-break; leftovers of a cycle follow in
/// timestamp order.
fn topological(set: &BTreeSet<Timestamp>, lo: &LinRelation) -> Vec<Timestamp> {
    let mut out = Vec::new();
    let mut left = set.clone();
    while !left.is_empty() {
        let next = left
            .iter()
            .find(|&&t| !left.iter().any(|&u| u != t && lo.contains(u, t)))
            .or_else(|| left.iter().next())
            .copied()
            .unwrap();
        left.remove(&next);
        out.push(next);
    }
    out
}

/// A broken structural claim about a merge partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionViolation {
    pub claim: &'static str,
    pub from: Timestamp,
    pub to: Timestamp,
}

impl MergePartition {
    /// Disjointness and coverage of the six sets and the buckets.
    pub fn check_shape(&self) -> std::result::Result<(), String> {
        let disjoint_cover = |x: &BTreeSet<Timestamp>, y: &BTreeSet<Timestamp>, all: &BTreeSet<Timestamp>| {
            x.is_disjoint(y) && x.union(y).copied().collect::<BTreeSet<_>>() == *all
        };
        if !disjoint_cover(&self.l1a, &self.l1b, &self.l1_local) {
            return Err("side 1 sets do not partition the local events".into());
        }
        if !disjoint_cover(&self.l2a, &self.l2b, &self.l2_local) {
            return Err("side 2 sets do not partition the local events".into());
        }
        if !disjoint_cover(&self.ltop_a, &self.ltop_b, &self.ltop) {
            return Err("LCA sets do not partition the LCA events".into());
        }
        let mut seen = BTreeSet::new();
        for b in &self.buckets {
            for e in b.l1b.iter().chain(b.l2b.iter()) {
                if !seen.insert(*e) {
                    return Err(format!("{e} lands in two buckets"));
                }
            }
        }
        let all_b: BTreeSet<Timestamp> = self.l1b.union(&self.l2b).copied().collect();
        if seen != all_b {
            return Err("buckets do not cover the b-sets".into());
        }
        Ok(())
    }

    /// The edge-absence lemmas behind the sequence structure: nothing from
    /// the a-sides into the b-sides, nothing from LCA-after into LCA-before,
    /// no edge among LCA-after events, and no edge from a bucket into an
    /// earlier bucket. `lo` must be the relation the partition was built on.
    pub fn check_lemmas(&self, lo: &LinRelation) -> std::result::Result<(), PartitionViolation> {
        let none = |claim: &'static str, xs: &BTreeSet<Timestamp>, ys: &BTreeSet<Timestamp>| {
            for &x in xs {
                for &y in ys {
                    if x != y && lo.contains(x, y) {
                        return Err(PartitionViolation { claim, from: x, to: y });
                    }
                }
            }
            Ok(())
        };
        let a_side: BTreeSet<Timestamp> = self.l1a.union(&self.l2a).copied().collect();
        let b_side: BTreeSet<Timestamp> = self.l1b.union(&self.l2b).copied().collect();
        none("a-side before b-side", &a_side, &b_side)?;
        none("a-side before LCA", &a_side, &self.ltop)?;
        none("b-side before LCA-before", &b_side, &self.ltop_b)?;
        none("LCA-after before LCA-before", &self.ltop_a, &self.ltop_b)?;
        none("LCA-after events ordered", &self.ltop_a, &self.ltop_a)?;
        for (i, bi) in self.buckets.iter().enumerate() {
            let later: BTreeSet<Timestamp> = bi.l1b.union(&bi.l2b).copied().collect();
            for bj in &self.buckets[..i] {
                let earlier: BTreeSet<Timestamp> = bj.l1b.union(&bj.l2b).copied().collect();
                none("bucket before earlier bucket", &later, &earlier)?;
            }
        }
        Ok(())
    }
}

/// Findings for one transition.
#[derive(Clone, Debug, Default)]
pub struct StepReport {
    pub versions_checked: Vec<(VersionId, Outcome)>,
    pub heads: Vec<(ReplicaId, VersionId, Outcome)>,
    pub lin_failure: Option<Violation>,
    pub inconclusive: bool,
    pub divergence: Option<Divergence>,
    pub lca_violation: Option<LcaViolation>,
    pub partition: Option<MergePartition>,
    pub partition_violation: Option<String>,
    pub query_mismatch: Option<(Value, Value)>,
    pub lo_irreflexive: bool,
    pub lo_stable: bool,
    /// Individual property checks evaluated.
    pub assertions: usize,
}

impl StepReport {
    pub fn failed(&self) -> bool {
        self.lin_failure.is_some()
            || self.divergence.is_some()
            || self.lca_violation.is_some()
            || self.partition_violation.is_some()
            || self.query_mismatch.is_some()
            || !self.lo_irreflexive
            || !self.lo_stable
    }
}

/// Runs every verdict after each transition of one execution. Verdicts for
/// versions already checked are reused: lo only loses pairs as events are
/// added, so a witness stays valid.
pub struct Monitor {
    opts: LinOptions,
    verdicts: BTreeMap<VersionId, LinVerdict>,
    stable_prev: Option<LinRelation>,
}

impl Monitor {
    pub fn new(opts: LinOptions) -> Monitor {
        Monitor {
            opts,
            verdicts: BTreeMap::new(),
            stable_prev: None,
        }
    }

    pub fn verdict(&self, v: VersionId) -> Option<&LinVerdict> {
        self.verdicts.get(&v)
    }

    /// Check the initial configuration.
    pub fn start(&mut self, c: &Configuration) -> Result<StepReport> {
        self.after_step(c, None, &StepOutcome::default())
    }

    pub fn after_step(&mut self, c: &Configuration, t: Option<&Transition>, out: &StepOutcome) -> Result<StepReport> {
        let mut rep = StepReport::default();
        let lo = compute_lo(c)?;
        let stable = compute_stable_lo(c)?;
        rep.lo_irreflexive = lo_irreflexive(&lo) && lo_irreflexive(&stable);
        rep.lo_stable = match &self.stable_prev {
            Some(prev) => stable.restrict(&prev.over) == *prev,
            None => true,
        };
        rep.assertions += 2;

        for v in c.versions() {
            if self.verdicts.contains_key(&v.id) {
                continue;
            }
            let verdict = check_version_preferring(c, v.id, &lo, &stable, &self.opts)?;
            rep.versions_checked.push((v.id, verdict.outcome));
            rep.assertions += 1;
            match verdict.outcome {
                Outcome::NotLinearizable if rep.lin_failure.is_none() => {
                    rep.lin_failure = verdict.violation.clone();
                }
                Outcome::Inconclusive => rep.inconclusive = true,
                _ => {}
            }
            self.verdicts.insert(v.id, verdict);
        }
        for (r, h) in c.heads() {
            let outcome = self.verdicts[h].outcome;
            rep.heads.push((*r, *h, outcome));
            if outcome == Outcome::NotLinearizable {
                let v = rep
                    .lin_failure
                    .get_or_insert_with(|| self.verdicts[h].violation.clone().unwrap());
                if v.version == *h {
                    v.replica = Some(*r);
                }
            }
        }

        rep.divergence = check_convergence(c).err();
        rep.assertions += 1;
        if let Some(v) = out.version {
            rep.lca_violation = check_lca_lemma_for(c, v).err();
            rep.assertions += c.versions().len();
        }

        match t {
            Some(Transition::Merge { .. }) => {
                let v = out.version.unwrap();
                let parents = &c.version(v)?.parents;
                // the lemmas are argued over lo itself: the guard that drops an
                // rc pair once a non-commuting successor exists is what keeps
                // LCA-after events clear of LCA-before ones
                let p = partition_with(c, parents[0], parents[1], &lo)?;
                let merged = c.version(v)?.events.clone();
                let lo_m = lo.restrict(&merged);
                if let Err(e) = p.check_shape() {
                    rep.partition_violation = Some(e);
                } else if let Err(e) = p.check_lemmas(&lo_m) {
                    rep.partition_violation = Some(format!("{}: {} -> {}", e.claim, e.from, e.to));
                }
                rep.assertions += 2;
                rep.partition = Some(p);
            }
            Some(Transition::Query { r, q, .. }) => {
                let h = c.head(*r)?;
                if let (Some(w), Some(answer)) = (self.verdicts[&h].witness.as_ref(), out.answer.as_ref()) {
                    let spec = c.spec();
                    let s = crate::spec::apply_sequence(spec.as_ref(), &spec.init(), w)?;
                    let from_witness = spec.query(&s, q)?;
                    if &from_witness != answer {
                        rep.query_mismatch = Some((answer.clone(), from_witness));
                    }
                    rep.assertions += 1;
                }
            }
            _ => {}
        }
        self.stable_prev = Some(stable);
        Ok(rep)
    }
}
