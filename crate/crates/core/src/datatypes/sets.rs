use std::collections::{BTreeMap, BTreeSet};

use super::{int_of, map_of, one_arg, rep_key, same_arg_different_kind, Alphabet};
use crate::error::Result;
use crate::event::{Event, Op, QueryOp};
use crate::spec::{mismatch, unknown_query, Mrdt};
use crate::value::Value;

fn set_of(v: &Value) -> BTreeSet<Value> {
    v.as_set().cloned().unwrap_or_default()
}

fn add_rem_ops(alphabet: &Alphabet) -> Vec<Op> {
    let mut ops = Vec::new();
    for x in alphabet.iter() {
        ops.push(Op::with_arg("add", x));
        ops.push(Op::with_arg("rem", x));
    }
    ops
}

fn elem_of(tag: &Value) -> &Value {
    &tag.as_tuple().expect("tagged element")[0]
}

fn read_tags(tags: &BTreeSet<Value>) -> Value {
    Value::Set(tags.iter().map(|t| elem_of(t).clone()).collect())
}

fn contains_query(spec: &dyn Mrdt, q: &QueryOp, members: &Value) -> Result<Value> {
    let x = one_arg(spec, q)?;
    Ok(Value::Bool(
        members.as_set().is_some_and(|s| s.contains(&Value::str(x))),
    ))
}

/// The three-way OR-set merge: `(l ∩ a ∩ b) ∪ (a \ l) ∪ (b \ l)`.
pub fn orset_merge(lca: &Value, a: &Value, b: &Value) -> Value {
    let (l, a, b) = (set_of(lca), set_of(a), set_of(b));
    let mut out: BTreeSet<Value> = l.iter().filter(|x| a.contains(x) && b.contains(x)).cloned().collect();
    out.extend(a.difference(&l).cloned());
    out.extend(b.difference(&l).cloned());
    Value::Set(out)
}

/// Grow-only set.
pub struct GSet {
    alphabet: Alphabet,
}

impl GSet {
    pub fn new(alphabet: Alphabet) -> Self {
        GSet { alphabet }
    }
}

impl Mrdt for GSet {
    fn name(&self) -> &str {
        "gset"
    }

    fn init(&self) -> Value {
        Value::empty_set()
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        if e.op.name != "add" {
            return Err(mismatch(self, &e.op));
        }
        let x = one_arg(self, &e.op)?;
        let mut s = set_of(state);
        s.insert(Value::str(x));
        Ok(Value::Set(s))
    }

    fn merge3(&self, _lca: &Value, a: &Value, b: &Value) -> Value {
        Value::Set(set_of(a).union(&set_of(b)).cloned().collect())
    }

    fn merge2(&self, a: &Value, b: &Value) -> Option<Value> {
        Some(self.merge3(&Value::Unit, a, b))
    }

    fn has_merge2(&self) -> bool {
        true
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        match q.name.as_str() {
            "rd" => Ok(state.clone()),
            "contains" => contains_query(self, q, state),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        self.alphabet.iter().map(|x| Op::with_arg("add", x)).collect()
    }

    fn rc(&self, _: &Op, _: &Op) -> bool {
        false
    }

    fn commutes(&self, _: &Op, _: &Op) -> bool {
        true
    }
}

/// Two-phase set: removal is permanent. Both components only grow, so every
/// pair of operations commutes.
pub struct TwoPSet {
    alphabet: Alphabet,
}

impl TwoPSet {
    pub fn new(alphabet: Alphabet) -> Self {
        TwoPSet { alphabet }
    }
}

impl Mrdt for TwoPSet {
    fn name(&self) -> &str {
        "2p-set"
    }

    fn init(&self) -> Value {
        Value::pair(Value::empty_set(), Value::empty_set())
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        let x = Value::str(one_arg(self, &e.op)?);
        let parts = state.as_tuple().unwrap();
        let (mut added, mut removed) = (set_of(&parts[0]), set_of(&parts[1]));
        match e.op.name.as_str() {
            "add" => added.insert(x),
            "rem" => removed.insert(x),
            _ => return Err(mismatch(self, &e.op)),
        };
        Ok(Value::pair(Value::Set(added), Value::Set(removed)))
    }

    fn merge3(&self, _lca: &Value, a: &Value, b: &Value) -> Value {
        self.merge2(a, b).expect("2p-set state")
    }

    fn merge2(&self, a: &Value, b: &Value) -> Option<Value> {
        let (a, b) = (a.as_tuple()?, b.as_tuple()?);
        let union = |x: &Value, y: &Value| Value::Set(set_of(x).union(&set_of(y)).cloned().collect());
        Some(Value::pair(union(&a[0], &b[0]), union(&a[1], &b[1])))
    }

    fn has_merge2(&self) -> bool {
        true
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        let parts = state.as_tuple().unwrap();
        let members = Value::Set(set_of(&parts[0]).difference(&set_of(&parts[1])).cloned().collect());
        match q.name.as_str() {
            "rd" => Ok(members),
            "contains" => contains_query(self, q, &members),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        add_rem_ops(&self.alphabet)
    }

    fn rc(&self, _: &Op, _: &Op) -> bool {
        false
    }

    fn commutes(&self, _: &Op, _: &Op) -> bool {
        true
    }
}

fn orset_rc(o1: &Op, o2: &Op) -> bool {
    o1.name == "rem" && o2.name == "add" && o1.args == o2.args
}

/// Add-wins set with (element, timestamp) tags and the three-way merge.
pub struct OrSet {
    alphabet: Alphabet,
}

impl OrSet {
    pub fn new(alphabet: Alphabet) -> Self {
        OrSet { alphabet }
    }
}

impl Mrdt for OrSet {
    fn name(&self) -> &str {
        "orset"
    }

    fn init(&self) -> Value {
        Value::empty_set()
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        let x = Value::str(one_arg(self, &e.op)?);
        let mut s = set_of(state);
        match e.op.name.as_str() {
            "add" => {
                s.insert(Value::pair(x, Value::Int(e.ts.0 as i64)));
            }
            "rem" => s.retain(|t| elem_of(t) != &x),
            _ => return Err(mismatch(self, &e.op)),
        }
        Ok(Value::Set(s))
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        orset_merge(lca, a, b)
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        let members = read_tags(&set_of(state));
        match q.name.as_str() {
            "rd" => Ok(members),
            "contains" => contains_query(self, q, &members),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        add_rem_ops(&self.alphabet)
    }

    fn rc(&self, o1: &Op, o2: &Op) -> bool {
        orset_rc(o1, o2)
    }

    fn commutes(&self, o1: &Op, o2: &Op) -> bool {
        !same_arg_different_kind(o1, o2)
    }
}

/// State-based OR-set for binary merges: added tags plus removed tags.
pub struct OrSetTomb {
    alphabet: Alphabet,
}

impl OrSetTomb {
    pub fn new(alphabet: Alphabet) -> Self {
        OrSetTomb { alphabet }
    }
}

impl Mrdt for OrSetTomb {
    fn name(&self) -> &str {
        "orset"
    }

    fn init(&self) -> Value {
        Value::pair(Value::empty_set(), Value::empty_set())
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        let x = Value::str(one_arg(self, &e.op)?);
        let parts = state.as_tuple().unwrap();
        let (mut added, mut removed) = (set_of(&parts[0]), set_of(&parts[1]));
        match e.op.name.as_str() {
            "add" => {
                added.insert(Value::pair(x, Value::Int(e.ts.0 as i64)));
            }
            "rem" => removed.extend(added.iter().filter(|t| elem_of(t) == &x).cloned()),
            _ => return Err(mismatch(self, &e.op)),
        }
        Ok(Value::pair(Value::Set(added), Value::Set(removed)))
    }

    fn merge3(&self, _lca: &Value, a: &Value, b: &Value) -> Value {
        self.merge2(a, b).expect("orset state")
    }

    fn merge2(&self, a: &Value, b: &Value) -> Option<Value> {
        let (a, b) = (a.as_tuple()?, b.as_tuple()?);
        let union = |x: &Value, y: &Value| Value::Set(set_of(x).union(&set_of(y)).cloned().collect());
        Some(Value::pair(union(&a[0], &b[0]), union(&a[1], &b[1])))
    }

    fn has_merge2(&self) -> bool {
        true
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        let parts = state.as_tuple().unwrap();
        let live: BTreeSet<Value> = set_of(&parts[0]).difference(&set_of(&parts[1])).cloned().collect();
        let members = read_tags(&live);
        match q.name.as_str() {
            "rd" => Ok(members),
            "contains" => contains_query(self, q, &members),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        add_rem_ops(&self.alphabet)
    }

    fn rc(&self, o1: &Op, o2: &Op) -> bool {
        orset_rc(o1, o2)
    }

    fn commutes(&self, o1: &Op, o2: &Op) -> bool {
        !same_arg_different_kind(o1, o2)
    }
}

/// OR-set keeping at most one tag per (element, replica): triples
/// (element, replica, counter) plus the highest counter issued per pair.
pub struct OrSetEfficient {
    alphabet: Alphabet,
}

impl OrSetEfficient {
    pub fn new(alphabet: Alphabet) -> Self {
        OrSetEfficient { alphabet }
    }
}

fn triple_elem(t: &Value) -> &Value {
    &t.as_tuple().expect("triple")[0]
}

fn triple_slot(t: &Value) -> Value {
    let parts = t.as_tuple().expect("triple");
    Value::pair(parts[0].clone(), parts[1].clone())
}

impl Mrdt for OrSetEfficient {
    fn name(&self) -> &str {
        "orset-efficient"
    }

    fn init(&self) -> Value {
        Value::pair(Value::empty_set(), Value::empty_map())
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        let x = Value::str(one_arg(self, &e.op)?);
        let parts = state.as_tuple().unwrap();
        let (mut triples, mut counters) = (set_of(&parts[0]), map_of(&parts[1]));
        match e.op.name.as_str() {
            "add" => {
                let slot = Value::pair(x.clone(), rep_key(e));
                let c = int_of(counters.get(&slot)) + 1;
                triples.retain(|t| triple_slot(t) != slot);
                triples.insert(Value::Tuple(vec![x, rep_key(e), Value::Int(c)]));
                counters.insert(slot, Value::Int(c));
            }
            "rem" => triples.retain(|t| triple_elem(t) != &x),
            _ => return Err(mismatch(self, &e.op)),
        }
        Ok(Value::pair(Value::Set(triples), Value::Map(counters)))
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        let (l, a, b) = (lca.as_tuple().unwrap(), a.as_tuple().unwrap(), b.as_tuple().unwrap());
        let triples = orset_merge(&l[0], &a[0], &b[0]);
        let mut counters: BTreeMap<Value, Value> = map_of(&a[1]);
        for (k, v) in map_of(&b[1]) {
            let c = int_of(counters.get(&k)).max(int_of(Some(&v)));
            counters.insert(k, Value::Int(c));
        }
        Value::pair(triples, Value::Map(counters))
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        let parts = state.as_tuple().unwrap();
        let members = Value::Set(set_of(&parts[0]).iter().map(|t| triple_elem(t).clone()).collect());
        match q.name.as_str() {
            "rd" => Ok(members),
            "contains" => contains_query(self, q, &members),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        add_rem_ops(&self.alphabet)
    }

    fn rc(&self, o1: &Op, o2: &Op) -> bool {
        orset_rc(o1, o2)
    }

    fn commutes(&self, o1: &Op, o2: &Op) -> bool {
        !same_arg_different_kind(o1, o2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::apply_sequence;

    fn tag(x: &str, t: i64) -> Value {
        Value::pair(Value::str(x), Value::Int(t))
    }

    #[test]
    fn orset_do_matches_definition() {
        let spec = OrSet::new(Alphabet::default());
        let s = spec
            .apply(&spec.init(), &Event::new(1, 1, Op::with_arg("add", "a")))
            .unwrap();
        assert_eq!(s, Value::set_of([tag("a", 1)]));
        let two = Value::set_of([tag("a", 1), tag("a", 2)]);
        let s = spec.apply(&two, &Event::new(3, 1, Op::with_arg("rem", "a"))).unwrap();
        assert_eq!(s, Value::empty_set());
    }

    #[test]
    fn orset_merge_hand_values() {
        let empty = Value::empty_set();
        assert_eq!(
            orset_merge(&empty, &empty, &Value::set_of([tag("a", 2)])),
            Value::set_of([tag("a", 2)])
        );
        assert_eq!(
            orset_merge(
                &Value::set_of([tag("a", 1)]),
                &Value::set_of([tag("a", 1), tag("b", 2)]),
                &empty
            ),
            Value::set_of([tag("b", 2)])
        );
    }

    #[test]
    fn orset_sequence_and_query() {
        let spec = OrSet::new(Alphabet::default());
        let pi = vec![
            Event::new(1, 1, Op::with_arg("add", "a")),
            Event::new(2, 2, Op::with_arg("rem", "a")),
        ];
        assert_eq!(apply_sequence(&spec, &spec.init(), &pi).unwrap(), Value::empty_set());
        let s = Value::set_of([tag("a", 1), tag("a", 4)]);
        assert_eq!(
            spec.query(&s, &Op::new("rd")).unwrap(),
            Value::set_of([Value::str("a")])
        );
        assert_eq!(spec.query(&spec.init(), &Op::new("rd")).unwrap(), Value::empty_set());
    }

    #[test]
    fn orset_rc_direction() {
        let spec = OrSet::new(Alphabet::default());
        let (add, rem) = (Op::with_arg("add", "a"), Op::with_arg("rem", "a"));
        assert!(spec.rc(&rem, &add));
        assert!(!spec.rc(&add, &rem));
        assert!(spec.commutes(&add, &Op::with_arg("add", "b")));
        assert!(!spec.commutes(&add, &rem));
    }

    #[test]
    fn efficient_orset_keeps_one_tag_per_slot() {
        let spec = OrSetEfficient::new(Alphabet::default());
        let pi = vec![
            Event::new(1, 1, Op::with_arg("add", "a")),
            Event::new(2, 1, Op::with_arg("add", "a")),
        ];
        let s = apply_sequence(&spec, &spec.init(), &pi).unwrap();
        assert_eq!(s.as_tuple().unwrap()[0].as_set().unwrap().len(), 1);
        let s = spec.apply(&s, &Event::new(3, 1, Op::with_arg("rem", "a"))).unwrap();
        assert_eq!(spec.query(&s, &Op::new("rd")).unwrap(), Value::empty_set());
        // the counter survives removal so the next tag is fresh
        let s = spec.apply(&s, &Event::new(4, 1, Op::with_arg("add", "a"))).unwrap();
        let triples = s.as_tuple().unwrap()[0].as_set().unwrap();
        assert!(triples.contains(&Value::Tuple(vec![Value::str("a"), Value::Int(1), Value::Int(3)])));
    }
}
