use std::collections::BTreeMap;

use super::{int_of, map_of, no_args, rep_key};
use crate::error::Result;
use crate::event::{Event, Op, QueryOp};
use crate::spec::{mismatch, unknown_query, Mrdt};
use crate::value::Value;

/// Increment-only counter with the arithmetic three-way merge.
pub struct Counter;

impl Mrdt for Counter {
    fn name(&self) -> &str {
        "counter"
    }

    fn init(&self) -> Value {
        Value::Int(0)
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        if e.op.name != "inc" {
            return Err(mismatch(self, &e.op));
        }
        no_args(self, &e.op)?;
        Ok(Value::Int(int_of(Some(state)) + 1))
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        Value::Int(int_of(Some(a)) + int_of(Some(b)) - int_of(Some(lca)))
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        match q.name.as_str() {
            "rd" => Ok(state.clone()),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        vec![Op::new("inc")]
    }

    fn rc(&self, _: &Op, _: &Op) -> bool {
        false
    }

    fn commutes(&self, _: &Op, _: &Op) -> bool {
        true
    }
}

fn bump(entries: &Value, key: Value) -> Value {
    let mut m = map_of(entries);
    let n = int_of(m.get(&key));
    m.insert(key, Value::Int(n + 1));
    Value::Map(m)
}

fn pointwise(l: Option<&Value>, a: &Value, b: &Value, f: impl Fn(i64, i64, i64) -> i64) -> Value {
    let lm = l.map(map_of).unwrap_or_default();
    let am = map_of(a);
    let bm = map_of(b);
    let mut out = BTreeMap::new();
    for k in am.keys().chain(bm.keys()) {
        let v = f(int_of(lm.get(k)), int_of(am.get(k)), int_of(bm.get(k)));
        out.insert(k.clone(), Value::Int(v));
    }
    Value::Map(out)
}

fn total(entries: &Value) -> i64 {
    map_of(entries).values().map(|v| int_of(Some(v))).sum()
}

/// Per-replica increment counts; binary merge is the pointwise maximum.
pub struct GCounter;

impl Mrdt for GCounter {
    fn name(&self) -> &str {
        "gcounter"
    }

    fn init(&self) -> Value {
        Value::empty_map()
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        if e.op.name != "inc" {
            return Err(mismatch(self, &e.op));
        }
        no_args(self, &e.op)?;
        Ok(bump(state, rep_key(e)))
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        pointwise(Some(lca), a, b, |l, a, b| a + b - l)
    }

    fn merge2(&self, a: &Value, b: &Value) -> Option<Value> {
        Some(pointwise(None, a, b, |_, a, b| a.max(b)))
    }

    fn has_merge2(&self) -> bool {
        true
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        match q.name.as_str() {
            "rd" => Ok(Value::Int(total(state))),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        vec![Op::new("inc")]
    }

    fn rc(&self, _: &Op, _: &Op) -> bool {
        false
    }

    fn commutes(&self, _: &Op, _: &Op) -> bool {
        true
    }
}

/// A pair of per-replica grow-only counters (increments, decrements).
pub struct PnCounter;

impl Mrdt for PnCounter {
    fn name(&self) -> &str {
        "pn-counter"
    }

    fn init(&self) -> Value {
        Value::pair(Value::empty_map(), Value::empty_map())
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        no_args(self, &e.op)?;
        let parts = state.as_tuple().unwrap_or(&[]);
        let (p, n) = (parts[0].clone(), parts[1].clone());
        match e.op.name.as_str() {
            "inc" => Ok(Value::pair(bump(&p, rep_key(e)), n)),
            "dec" => Ok(Value::pair(p, bump(&n, rep_key(e)))),
            _ => Err(mismatch(self, &e.op)),
        }
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        let (l, a, b) = (lca.as_tuple().unwrap(), a.as_tuple().unwrap(), b.as_tuple().unwrap());
        let f = |l: i64, a: i64, b: i64| a + b - l;
        Value::pair(
            pointwise(Some(&l[0]), &a[0], &b[0], f),
            pointwise(Some(&l[1]), &a[1], &b[1], f),
        )
    }

    fn merge2(&self, a: &Value, b: &Value) -> Option<Value> {
        let (a, b) = (a.as_tuple()?, b.as_tuple()?);
        let f = |_: i64, a: i64, b: i64| a.max(b);
        Some(Value::pair(
            pointwise(None, &a[0], &b[0], f),
            pointwise(None, &a[1], &b[1], f),
        ))
    }

    fn has_merge2(&self) -> bool {
        true
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        match q.name.as_str() {
            "rd" => {
                let parts = state.as_tuple().unwrap();
                Ok(Value::Int(total(&parts[0]) - total(&parts[1])))
            }
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        vec![Op::new("inc"), Op::new("dec")]
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

    #[test]
    fn counter_merge_golden() {
        let v = Counter.merge3(&Value::Int(2), &Value::Int(4), &Value::Int(5));
        assert_eq!(v, Value::Int(7));
    }

    #[test]
    fn counter_rejects_foreign_ops() {
        let e = Event::new(1, 0, Op::with_arg("add", "a"));
        assert!(Counter.apply(&Value::Int(0), &e).is_err());
    }

    #[test]
    fn pn_counter_reads_difference() {
        let spec = PnCounter;
        let mut s = spec.init();
        for (t, name) in [(1, "inc"), (2, "inc"), (3, "dec")] {
            s = spec.apply(&s, &Event::new(t, (t % 2) as u32, Op::new(name))).unwrap();
        }
        assert_eq!(spec.query(&s, &Op::new("rd")).unwrap(), Value::Int(1));
    }

    #[test]
    fn gcounter_binary_merge_is_max() {
        let spec = GCounter;
        let s0 = spec.init();
        let a = spec.apply(&s0, &Event::new(1, 1, Op::new("inc"))).unwrap();
        let b = spec.apply(&s0, &Event::new(2, 2, Op::new("inc"))).unwrap();
        let m = spec.merge2(&a, &b).unwrap();
        assert_eq!(spec.query(&m, &Op::new("rd")).unwrap(), Value::Int(2));
        assert_eq!(spec.merge2(&m, &a).unwrap(), m);
    }
}
