use std::collections::{BTreeMap, BTreeSet};

use super::Alphabet;
use crate::error::Result;
use crate::event::{Event, Op, QueryOp};
use crate::spec::{mismatch, unknown_query, Mrdt};
use crate::value::Value;

/// Parent identifiers offered by the operation alphabet: the root and the
/// nodes created by the first few timestamps.
pub const RGA_PARENTS: [&str; 4] = ["root", "1", "2", "3"];

/// Replicated growable array without tombstones. Each node is
/// `(id, parent, elem)` where `id` is the inserting event's timestamp and
/// parent 0 is the root. Siblings are read newest first.
pub struct Rga {
    alphabet: Alphabet,
}

impl Rga {
    pub fn new(alphabet: Alphabet) -> Self {
        Rga { alphabet }
    }
}

fn parent_id(p: &str) -> Option<i64> {
    if p == "root" {
        Some(0)
    } else {
        p.parse().ok().filter(|n: &i64| *n > 0)
    }
}

fn nodes(state: &Value) -> Vec<(i64, i64, Value)> {
    state
        .as_set()
        .into_iter()
        .flatten()
        .filter_map(|n| match n.as_tuple()? {
            [id, parent, elem] => Some((id.as_int()?, parent.as_int()?, elem.clone())),
            _ => None,
        })
        .collect()
}

/// Depth-first from the root with children newest first. Nodes not reached
/// that way (missing parent, or a parent cycle among the low ids) are then
/// walked in timestamp order as roots of their own.
fn linearize(state: &Value) -> Vec<Value> {
    let mut elems = BTreeMap::new();
    let mut children: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for (id, parent, elem) in nodes(state) {
        elems.insert(id, elem);
        children.entry(parent).or_default().push(id);
    }
    for list in children.values_mut() {
        list.sort_by(|a, b| b.cmp(a));
    }

    fn walk(
        id: i64,
        children: &BTreeMap<i64, Vec<i64>>,
        elems: &BTreeMap<i64, Value>,
        seen: &mut BTreeSet<i64>,
        out: &mut Vec<Value>,
    ) {
        if !seen.insert(id) {
            return;
        }
        if let Some(e) = elems.get(&id) {
            out.push(e.clone());
        }
        for c in children.get(&id).into_iter().flatten() {
            walk(*c, children, elems, seen, out);
        }
    }

    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    walk(0, &children, &elems, &mut seen, &mut out);
    for id in elems.keys() {
        walk(*id, &children, &elems, &mut seen, &mut out);
    }
    out
}

impl Mrdt for Rga {
    fn name(&self) -> &str {
        "rga"
    }

    fn init(&self) -> Value {
        Value::empty_set()
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        let (parent, elem) = match (e.op.name.as_str(), e.op.args.as_slice(), &e.op.inner) {
            ("ins", [p, x], None) => (parent_id(p).ok_or_else(|| mismatch(self, &e.op))?, x),
            _ => return Err(mismatch(self, &e.op)),
        };
        let mut s = state.as_set().cloned().unwrap_or_default();
        s.insert(Value::Tuple(vec![
            Value::Int(e.ts.0 as i64),
            Value::Int(parent),
            Value::str(elem.as_str()),
        ]));
        Ok(Value::Set(s))
    }

    fn merge3(&self, _lca: &Value, a: &Value, b: &Value) -> Value {
        self.merge2(a, b).unwrap()
    }

    fn merge2(&self, a: &Value, b: &Value) -> Option<Value> {
        let mut s = a.as_set().cloned().unwrap_or_default();
        s.extend(b.as_set().into_iter().flatten().cloned());
        Some(Value::Set(s))
    }

    fn has_merge2(&self) -> bool {
        true
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        match q.name.as_str() {
            "rd" => Ok(Value::Tuple(linearize(state))),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        let mut ops = Vec::new();
        for p in RGA_PARENTS {
            for x in self.alphabet.iter() {
                ops.push(Op::with_args("ins", &[p, x]));
            }
        }
        ops
    }

    fn rc(&self, _: &Op, _: &Op) -> bool {
        false
    }

    fn commutes(&self, _: &Op, _: &Op) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ins(t: u64, p: &str, x: &str) -> Event {
        Event::new(t, 0, Op::with_args("ins", &[p, x]))
    }

    fn read(spec: &Rga, s: &Value) -> Vec<String> {
        match spec.query(s, &Op::new("rd")).unwrap() {
            Value::Tuple(v) => v.iter().map(|x| x.as_str().unwrap().to_string()).collect(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn newest_sibling_first_then_subtree() {
        let spec = Rga::new(Alphabet::default());
        let mut s = spec.init();
        for e in [
            ins(1, "root", "a"),
            ins(2, "1", "b"),
            ins(3, "root", "c"),
            ins(4, "1", "d"),
        ] {
            s = spec.apply(&s, &e).unwrap();
        }
        // root -> [c(3), a(1)]; a -> [d(4), b(2)]
        assert_eq!(read(&spec, &s), ["c", "a", "d", "b"]);
    }

    #[test]
    fn orphans_follow_in_timestamp_order() {
        let spec = Rga::new(Alphabet::default());
        let mut s = spec.init();
        for e in [ins(5, "3", "x"), ins(4, "2", "y"), ins(6, "root", "z")] {
            s = spec.apply(&s, &e).unwrap();
        }
        assert_eq!(read(&spec, &s), ["z", "y", "x"]);
    }

    #[test]
    fn self_parented_nodes_are_still_read() {
        let spec = Rga::new(Alphabet::default());
        let mut s = spec.init();
        for e in [ins(1, "1", "a"), ins(2, "3", "b"), ins(3, "2", "c")] {
            s = spec.apply(&s, &e).unwrap();
        }
        assert_eq!(read(&spec, &s), ["a", "b", "c"]);
    }
}
