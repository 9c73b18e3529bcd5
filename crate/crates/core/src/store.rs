//! The replicated store: versions, replica heads, per-version event sets, the
//! version DAG and visibility.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, Op, QueryOp, ReplicaId, Timestamp};
use crate::spec::{Mode, MrdtSpec};
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VersionId(pub usize);

impl fmt::Display for VersionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug)]
pub struct Version {
    pub id: VersionId,
    pub state: Value,
    pub events: BTreeSet<Timestamp>,
    pub parents: Vec<VersionId>,
    /// Reflexive ancestors, indexed by version id.
    pub ancestors: FixedBitSet,
}

impl Version {
    pub fn is_ancestor_of(&self, other: &Version) -> bool {
        other.ancestors.contains(self.id.0)
    }
}

/// One store transition. `ts` on `Apply` pins the event timestamp (used by
/// replay); `expected` on `Query` is the canonical text of the recorded
/// answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transition {
    CreateBranch {
        new: ReplicaId,
        from: ReplicaId,
    },
    Apply {
        r: ReplicaId,
        op: Op,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts: Option<Timestamp>,
    },
    Merge {
        r1: ReplicaId,
        r2: ReplicaId,
    },
    Query {
        r: ReplicaId,
        q: QueryOp,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expected: Option<String>,
    },
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::CreateBranch { new, from } => write!(f, "branch {new} from {from}"),
            Transition::Apply { r, op, ts } => match ts {
                Some(t) => write!(f, "{r} apply {op} @{t}"),
                None => write!(f, "{r} apply {op}"),
            },
            Transition::Merge { r1, r2 } => write!(f, "merge {r1} <- {r2}"),
            Transition::Query { r, q, .. } => write!(f, "{r} query {q}"),
        }
    }
}

/// What a transition produced.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub version: Option<VersionId>,
    pub event: Option<Event>,
    pub answer: Option<Value>,
}

/// A store configuration. Cloning is cheap: versions are shared.
#[derive(Clone)]
pub struct Configuration {
    spec: MrdtSpec,
    mode: Mode,
    versions: Vec<Arc<Version>>,
    heads: BTreeMap<ReplicaId, VersionId>,
    events: BTreeMap<Timestamp, Event>,
    /// Creation index of each event; the order events entered the store.
    created: BTreeMap<Timestamp, usize>,
    /// Events visible to each event when it was generated. This is the
    /// event set of a causally closed version, so it is already transitive.
    vis: BTreeMap<Timestamp, Arc<BTreeSet<Timestamp>>>,
    next_ts: u64,
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Configuration")
            .field("spec", &self.spec.name())
            .field("mode", &self.mode)
            .field("versions", &self.versions.len())
            .field("heads", &self.heads)
            .finish()
    }
}

impl Configuration {
    pub fn new(spec: MrdtSpec, mode: Mode) -> Configuration {
        let mut anc = FixedBitSet::with_capacity(1);
        anc.insert(0);
        let v0 = Version {
            id: VersionId(0),
            state: spec.init(),
            events: BTreeSet::new(),
            parents: Vec::new(),
            ancestors: anc,
        };
        Configuration {
            spec,
            mode,
            versions: vec![Arc::new(v0)],
            heads: BTreeMap::from([(ReplicaId(0), VersionId(0))]),
            events: BTreeMap::new(),
            created: BTreeMap::new(),
            vis: BTreeMap::new(),
            next_ts: 1,
        }
    }

    pub fn spec(&self) -> &MrdtSpec {
        &self.spec
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn version(&self, v: VersionId) -> Result<&Arc<Version>> {
        self.versions.get(v.0).ok_or(Error::UnknownVersion(v.0))
    }

    pub fn versions(&self) -> &[Arc<Version>] {
        &self.versions
    }

    pub fn latest(&self) -> VersionId {
        VersionId(self.versions.len() - 1)
    }

    pub fn heads(&self) -> &BTreeMap<ReplicaId, VersionId> {
        &self.heads
    }

    pub fn head(&self, r: ReplicaId) -> Result<VersionId> {
        self.heads.get(&r).copied().ok_or(Error::InactiveReplica(r))
    }

    pub fn is_active(&self, r: ReplicaId) -> bool {
        self.heads.contains_key(&r)
    }

    pub fn events(&self) -> &BTreeMap<Timestamp, Event> {
        &self.events
    }

    pub fn event(&self, t: Timestamp) -> Option<&Event> {
        self.events.get(&t)
    }

    /// Position of an event in generation order.
    pub fn creation_index(&self, t: Timestamp) -> Option<usize> {
        self.created.get(&t).copied()
    }

    pub fn next_timestamp(&self) -> Timestamp {
        Timestamp(self.next_ts)
    }

    /// `e1 →vis e2`.
    pub fn vis(&self, e1: Timestamp, e2: Timestamp) -> bool {
        self.vis.get(&e2).is_some_and(|s| s.contains(&e1))
    }

    pub fn concurrent(&self, e1: Timestamp, e2: Timestamp) -> bool {
        e1 != e2 && !self.vis(e1, e2) && !self.vis(e2, e1)
    }

    /// Every generated visibility pair `(before, after)`.
    pub fn vis_pairs(&self) -> impl Iterator<Item = (Timestamp, Timestamp)> + '_ {
        self.vis.iter().flat_map(|(t, s)| s.iter().map(move |b| (*b, *t)))
    }

    pub fn state_of(&self, r: ReplicaId) -> Result<&Value> {
        Ok(&self.version(self.head(r)?)?.state)
    }

    fn push_version(&mut self, state: Value, events: BTreeSet<Timestamp>, parents: Vec<VersionId>) -> VersionId {
        let id = VersionId(self.versions.len());
        let mut anc = FixedBitSet::with_capacity(id.0 + 1);
        for p in &parents {
            anc.union_with(&self.versions[p.0].ancestors);
        }
        anc.grow(id.0 + 1);
        anc.insert(id.0);
        self.versions.push(Arc::new(Version {
            id,
            state,
            events,
            parents,
            ancestors: anc,
        }));
        id
    }

    pub fn create_branch(&mut self, new: ReplicaId, from: ReplicaId) -> Result<VersionId> {
        let src = self.head(from)?;
        if self.is_active(new) {
            return Err(Error::ReplicaExists(new));
        }
        let v = self.version(src)?.clone();
        let id = self.push_version(v.state.clone(), v.events.clone(), vec![src]);
        self.heads.insert(new, id);
        Ok(id)
    }

    /// Apply `op` at `r`. With `ts` absent a fresh timestamp is allocated;
    /// a pinned timestamp must not be in use.
    pub fn apply_op(&mut self, r: ReplicaId, op: Op, ts: Option<Timestamp>) -> Result<(VersionId, Event)> {
        let src = self.head(r)?;
        let t = match ts {
            Some(t) if self.events.contains_key(&t) || t.0 == 0 => return Err(Error::StaleTimestamp(t)),
            Some(t) => t,
            None => Timestamp(self.next_ts),
        };
        let e = Event { ts: t, rep: r, op };
        let v = self.version(src)?.clone();
        let state = self.spec.apply(&v.state, &e)?;
        let mut events = v.events.clone();
        events.insert(t);
        self.vis.insert(t, Arc::new(v.events.clone()));
        self.created.insert(t, self.created.len());
        self.events.insert(t, e.clone());
        self.next_ts = self.next_ts.max(t.0 + 1);
        let id = self.push_version(state, events, vec![src]);
        self.heads.insert(r, id);
        Ok((id, e))
    }

    /// Merge `r2`'s head into `r1`; only `r1` moves.
    pub fn merge_replicas(&mut self, r1: ReplicaId, r2: ReplicaId) -> Result<VersionId> {
        let (h1, h2) = (self.head(r1)?, self.head(r2)?);
        let (a, b) = (self.version(h1)?.clone(), self.version(h2)?.clone());
        let state = match self.mode {
            Mode::Mrdt => {
                let (lca, _) = self.resolve_lca_state(h1, h2)?;
                self.spec.merge3(&lca, &a.state, &b.state)
            }
            Mode::Crdt => self
                .spec
                .merge2(&a.state, &b.state)
                .ok_or_else(|| Error::NoBinaryMerge(self.spec.name().to_string()))?,
        };
        let events = a.events.union(&b.events).copied().collect();
        let id = self.push_version(state, events, vec![h1, h2]);
        self.heads.insert(r1, id);
        Ok(id)
    }

    pub fn query_replica(&self, r: ReplicaId, q: &QueryOp) -> Result<Value> {
        self.spec.query(self.state_of(r)?, q)
    }

    pub fn step(&mut self, t: &Transition) -> Result<StepOutcome> {
        Ok(match t {
            Transition::CreateBranch { new, from } => StepOutcome {
                version: Some(self.create_branch(*new, *from)?),
                ..Default::default()
            },
            Transition::Apply { r, op, ts } => {
                let (v, e) = self.apply_op(*r, op.clone(), *ts)?;
                StepOutcome {
                    version: Some(v),
                    event: Some(e),
                    answer: None,
                }
            }
            Transition::Merge { r1, r2 } => StepOutcome {
                version: Some(self.merge_replicas(*r1, *r2)?),
                ..Default::default()
            },
            Transition::Query { r, q, .. } => StepOutcome {
                answer: Some(self.query_replica(*r, q)?),
                ..Default::default()
            },
        })
    }

    /// Maximal elements of a set of common ancestors.
    fn maximal(&self, common: &FixedBitSet) -> Vec<VersionId> {
        common
            .ones()
            .filter(|&c| !common.ones().any(|d| d != c && self.versions[d].ancestors.contains(c)))
            .map(VersionId)
            .collect()
    }

    fn common(&self, a: &FixedBitSet, b: &FixedBitSet) -> FixedBitSet {
        let mut c = a.clone();
        c.intersect_with(b);
        c
    }

    /// Common ancestors not dominated by another common ancestor, ascending.
    pub fn potential_lcas(&self, v1: VersionId, v2: VersionId) -> Result<Vec<VersionId>> {
        let (a, b) = (self.version(v1)?, self.version(v2)?);
        Ok(self.maximal(&self.common(&a.ancestors, &b.ancestors)))
    }

    /// The lowest common ancestor, when a single one dominates the rest.
    pub fn find_lca(&self, v1: VersionId, v2: VersionId) -> Result<Option<VersionId>> {
        let p = self.potential_lcas(v1, v2)?;
        Ok(if p.len() == 1 { Some(p[0]) } else { None })
    }

    /// State and event set to merge against: the LCA itself when unique,
    /// otherwise the potential LCAs merged pairwise in ascending id order,
    /// each pairwise merge using its own recursively resolved ancestor.
    pub fn resolve_lca_state(&self, v1: VersionId, v2: VersionId) -> Result<(Value, BTreeSet<Timestamp>)> {
        let (a, b) = (self.version(v1)?, self.version(v2)?);
        let r = self.resolve(&a.ancestors, &b.ancestors);
        Ok((r.state, r.events))
    }

    fn resolve(&self, anc1: &FixedBitSet, anc2: &FixedBitSet) -> Resolved {
        let maxima = self.maximal(&self.common(anc1, anc2));
        let Some((first, rest)) = maxima.split_first() else {
            return Resolved {
                state: self.spec.init(),
                events: BTreeSet::new(),
                ancestors: FixedBitSet::new(),
            };
        };
        let v = &self.versions[first.0];
        let mut acc = Resolved {
            state: v.state.clone(),
            events: v.events.clone(),
            ancestors: v.ancestors.clone(),
        };
        for next in rest {
            let n = &self.versions[next.0];
            let lca = self.resolve(&acc.ancestors, &n.ancestors);
            acc.state = self.spec.merge3(&lca.state, &acc.state, &n.state);
            acc.events.extend(n.events.iter().copied());
            acc.ancestors.union_with(&n.ancestors);
        }
        acc
    }

    /// Event set of the merge base used for `v1`, `v2`.
    pub fn lca_events(&self, v1: VersionId, v2: VersionId) -> Result<BTreeSet<Timestamp>> {
        let mut out = BTreeSet::new();
        for p in self.potential_lcas(v1, v2)? {
            out.extend(self.versions[p.0].events.iter().copied());
        }
        Ok(out)
    }

    /// DAG and event-set invariants: parents precede children, event sets
    /// grow along edges, heads exist, versions are causally closed and every
    /// timestamp is unique.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for v in &self.versions {
            for p in &v.parents {
                if p.0 >= v.id.0 {
                    return Err(format!("edge {p} -> {} is not forward", v.id));
                }
                let pe = &self.versions[p.0].events;
                if !pe.is_subset(&v.events) {
                    return Err(format!("L({p}) is not contained in L({})", v.id));
                }
            }
            for t in &v.events {
                let Some(before) = self.vis.get(t) else {
                    return Err(format!("{} holds unknown event {t}", v.id));
                };
                if !before.is_subset(&v.events) {
                    return Err(format!("{} is not causally closed at {t}", v.id));
                }
            }
        }
        for (r, h) in &self.heads {
            if h.0 >= self.versions.len() {
                return Err(format!("head of {r} is dangling"));
            }
        }
        if self.events.keys().any(|t| t.0 >= self.next_ts) {
            return Err("timestamp allocator is behind a used timestamp".into());
        }
        Ok(())
    }
}

struct Resolved {
    state: Value,
    events: BTreeSet<Timestamp>,
    ancestors: FixedBitSet,
}

/// Convenience for initial configurations in MRDT mode.
pub fn init_config(spec: MrdtSpec) -> Configuration {
    Configuration::new(spec, Mode::Mrdt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datatypes::{Alphabet, Counter, OrSet};

    fn r(n: u32) -> ReplicaId {
        ReplicaId(n)
    }

    #[test]
    fn init_has_one_replica() {
        let c = init_config(Arc::new(Counter));
        assert_eq!(c.heads().len(), 1);
        assert_eq!(c.state_of(r(0)).unwrap(), &Value::Int(0));
        assert!(c.version(VersionId(0)).unwrap().events.is_empty());
    }

    #[test]
    fn branch_errors() {
        let mut c = init_config(Arc::new(Counter));
        c.create_branch(r(1), r(0)).unwrap();
        assert_eq!(c.create_branch(r(1), r(0)), Err(Error::ReplicaExists(r(1))));
        assert_eq!(c.create_branch(r(2), r(5)), Err(Error::InactiveReplica(r(5))));
    }

    #[test]
    fn counter_merge_via_lca() {
        let mut c = init_config(Arc::new(Counter));
        for _ in 0..2 {
            c.apply_op(r(0), Op::new("inc"), None).unwrap();
        }
        c.create_branch(r(1), r(0)).unwrap();
        for _ in 0..2 {
            c.apply_op(r(0), Op::new("inc"), None).unwrap();
        }
        for _ in 0..3 {
            c.apply_op(r(1), Op::new("inc"), None).unwrap();
        }
        c.merge_replicas(r(0), r(1)).unwrap();
        assert_eq!(c.state_of(r(0)).unwrap(), &Value::Int(7));
        c.check_invariants().unwrap();
    }

    #[test]
    fn pinned_timestamp_must_be_fresh() {
        let mut c = init_config(Arc::new(OrSet::new(Alphabet::default())));
        c.apply_op(r(0), Op::with_arg("add", "a"), Some(Timestamp(5))).unwrap();
        assert_eq!(
            c.apply_op(r(0), Op::with_arg("add", "a"), Some(Timestamp(5)))
                .unwrap_err(),
            Error::StaleTimestamp(Timestamp(5))
        );
        assert_eq!(c.next_timestamp(), Timestamp(6));
    }

    #[test]
    fn lca_of_self_is_self() {
        let mut c = init_config(Arc::new(Counter));
        let (v, _) = c.apply_op(r(0), Op::new("inc"), None).unwrap();
        assert_eq!(c.find_lca(v, v).unwrap(), Some(v));
        assert_eq!(c.potential_lcas(v, v).unwrap(), vec![v]);
    }
}
