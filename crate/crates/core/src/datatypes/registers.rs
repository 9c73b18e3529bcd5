use std::collections::BTreeMap;

use super::{map_of, one_arg, rep_key, Alphabet, REGISTER_VALUES};
use crate::error::Result;
use crate::event::{Event, Op, QueryOp};
use crate::spec::{mismatch, unknown_query, Mrdt};
use crate::value::Value;

pub const GMAP_VALUES: [&str; 3] = ["1", "2", "3"];

/// Grow-only map from keys to integers; `put` keeps the larger value.
pub struct GMap {
    alphabet: Alphabet,
}

impl GMap {
    pub fn new(alphabet: Alphabet) -> Self {
        GMap { alphabet }
    }
}

fn max_pointwise(a: &Value, b: &Value) -> Value {
    let mut out = map_of(a);
    for (k, v) in map_of(b) {
        let keep = out.get(&k).is_some_and(|old| *old >= v);
        if !keep {
            out.insert(k, v);
        }
    }
    Value::Map(out)
}

impl Mrdt for GMap {
    fn name(&self) -> &str {
        "gmap"
    }

    fn init(&self) -> Value {
        Value::empty_map()
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        let (k, v) = match (e.op.name.as_str(), e.op.args.as_slice(), &e.op.inner) {
            ("put", [k, v], None) => (k, v),
            _ => return Err(mismatch(self, &e.op)),
        };
        let v: i64 = v.parse().map_err(|_| mismatch(self, &e.op))?;
        Ok(max_pointwise(
            state,
            &Value::map_of([(Value::str(k.as_str()), Value::Int(v))]),
        ))
    }

    fn merge3(&self, _lca: &Value, a: &Value, b: &Value) -> Value {
        max_pointwise(a, b)
    }

    fn merge2(&self, a: &Value, b: &Value) -> Option<Value> {
        Some(max_pointwise(a, b))
    }

    fn has_merge2(&self) -> bool {
        true
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        match q.name.as_str() {
            "rd" => Ok(state.clone()),
            "get" => {
                let k = one_arg(self, q)?;
                Ok(map_of(state).remove(&Value::str(k)).unwrap_or(Value::Int(0)))
            }
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        let mut ops = Vec::new();
        for k in self.alphabet.iter() {
            for v in GMAP_VALUES {
                ops.push(Op::with_args("put", &[k, v]));
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

// A written value tagged with its event timestamp: `(ts, v)`.
fn stamped(e: &Event, v: &str) -> Value {
    Value::pair(Value::Int(e.ts.0 as i64), Value::str(v))
}

fn stamp_value(s: &Value) -> Option<&Value> {
    s.as_tuple().map(|t| &t[1])
}

/// Slot entries of the set-wins map: per replica `(counter, flag, (ts, v))`.
/// The counter and flag behave as the per-replica enable-wins flag; the
/// value is the latest write seen for that replica.
mod slot {
    use super::*;

    pub type Entry = (i64, bool, Value);

    fn none() -> Value {
        Value::pair(Value::Int(0), Value::Unit)
    }

    pub fn entry(v: Option<&Value>) -> Entry {
        match v.and_then(Value::as_tuple) {
            Some([c, f, s]) => (c.as_int().unwrap_or(0), f.as_bool().unwrap_or(false), s.clone()),
            _ => (0, false, none()),
        }
    }

    pub fn value((c, f, s): Entry) -> Value {
        Value::Tuple(vec![Value::Int(c), Value::Bool(f), s])
    }

    pub fn set(m: &Value, rep: Value, write: Value) -> Value {
        let mut m = map_of(m);
        let (c, _, old) = entry(m.get(&rep));
        m.insert(rep, value((c + 1, true, old.max(write))));
        Value::Map(m)
    }

    pub fn clear(m: &Value) -> Value {
        Value::Map(
            map_of(m)
                .into_iter()
                .map(|(k, v)| {
                    let (c, _, s) = entry(Some(&v));
                    (k, value((c, false, s)))
                })
                .collect(),
        )
    }

    fn merge_entry(l: Entry, a: Entry, b: Entry) -> Entry {
        if a.0 > b.0 {
            return a;
        }
        if b.0 > a.0 {
            return b;
        }
        let flag = if a.1 && b.1 {
            true
        } else if !a.1 && !b.1 {
            false
        } else if a.1 {
            a.0 > l.0
        } else {
            b.0 > l.0
        };
        (a.0, flag, a.2.max(b.2))
    }

    pub fn merge(l: &Value, a: &Value, b: &Value) -> Value {
        let (lm, am, bm) = (map_of(l), map_of(a), map_of(b));
        let mut out = BTreeMap::new();
        for k in am.keys().chain(bm.keys()) {
            let e = merge_entry(entry(lm.get(k)), entry(am.get(k)), entry(bm.get(k)));
            out.insert(k.clone(), value(e));
        }
        Value::Map(out)
    }

    /// The newest write among replicas whose flag is up, or `Unit`.
    pub fn read(m: &Value) -> Value {
        map_of(m)
            .values()
            .map(|v| entry(Some(v)))
            .filter(|(_, f, _)| *f)
            .map(|(_, _, s)| s)
            .max()
            .and_then(|s| stamp_value(&s).cloned())
            .unwrap_or(Value::Unit)
    }
}

fn register_ops(set: &str, unset: &str, key: Option<&str>) -> Vec<Op> {
    let mut ops = Vec::new();
    let prefix: Vec<&str> = key.into_iter().collect();
    for v in REGISTER_VALUES {
        let mut args = prefix.clone();
        args.push(v);
        ops.push(Op::with_args(set, &args));
    }
    ops.push(Op::with_args(unset, &prefix));
    ops
}

/// Set-wins map: each key holds an enable-wins presence flag together with
/// the latest written value.
pub struct SwMap {
    alphabet: Alphabet,
}

impl SwMap {
    pub fn new(alphabet: Alphabet) -> Self {
        SwMap { alphabet }
    }
}

impl Mrdt for SwMap {
    fn name(&self) -> &str {
        "swmap"
    }

    fn init(&self) -> Value {
        Value::empty_map()
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        let mut m = map_of(state);
        match (e.op.name.as_str(), e.op.args.as_slice(), &e.op.inner) {
            ("set", [k, v], None) => {
                let key = Value::str(k.as_str());
                let slots = m.remove(&key).unwrap_or_else(Value::empty_map);
                m.insert(key, slot::set(&slots, rep_key(e), stamped(e, v)));
            }
            ("del", [k], None) => {
                let key = Value::str(k.as_str());
                if let Some(slots) = m.remove(&key) {
                    m.insert(key, slot::clear(&slots));
                }
            }
            _ => return Err(mismatch(self, &e.op)),
        }
        Ok(Value::Map(m))
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        let (lm, am, bm) = (map_of(lca), map_of(a), map_of(b));
        let mut out = BTreeMap::new();
        for k in am.keys().chain(bm.keys()) {
            let get = |m: &BTreeMap<Value, Value>| m.get(k).cloned().unwrap_or_else(Value::empty_map);
            out.insert(k.clone(), slot::merge(&get(&lm), &get(&am), &get(&bm)));
        }
        Value::Map(out)
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        let live: BTreeMap<Value, Value> = map_of(state)
            .into_iter()
            .map(|(k, slots)| (k, slot::read(&slots)))
            .filter(|(_, v)| *v != Value::Unit)
            .collect();
        match q.name.as_str() {
            "rd" => Ok(Value::Map(live)),
            "get" => {
                let k = one_arg(self, q)?;
                Ok(live.get(&Value::str(k)).cloned().unwrap_or(Value::Unit))
            }
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        self.alphabet
            .iter()
            .flat_map(|k| register_ops("set", "del", Some(k)))
            .collect()
    }

    fn rc(&self, o1: &Op, o2: &Op) -> bool {
        o1.name == "del" && o2.name == "set" && o1.args.first() == o2.args.first()
    }

    fn commutes(&self, o1: &Op, o2: &Op) -> bool {
        o1.name == o2.name || o1.args.first() != o2.args.first()
    }
}

/// Optional register: a single set-wins slot; `unset` empties it.
pub struct OptReg;

impl Mrdt for OptReg {
    fn name(&self) -> &str {
        "optreg"
    }

    fn init(&self) -> Value {
        Value::empty_map()
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        match (e.op.name.as_str(), e.op.args.as_slice(), &e.op.inner) {
            ("set", [v], None) => Ok(slot::set(state, rep_key(e), stamped(e, v))),
            ("unset", [], None) => Ok(slot::clear(state)),
            _ => Err(mismatch(self, &e.op)),
        }
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        slot::merge(lca, a, b)
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        match q.name.as_str() {
            "rd" => Ok(slot::read(state)),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        register_ops("set", "unset", None)
    }

    fn rc(&self, o1: &Op, o2: &Op) -> bool {
        o1.name == "unset" && o2.name == "set"
    }

    fn commutes(&self, o1: &Op, o2: &Op) -> bool {
        o1.name == o2.name
    }
}

/// Multi-valued register: the latest write of every replica, newest
/// timestamp winning within a replica. Reads return the set of values.
pub struct Mvr;

impl Mrdt for Mvr {
    fn name(&self) -> &str {
        "mvr"
    }

    fn init(&self) -> Value {
        Value::empty_map()
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        if e.op.name != "write" {
            return Err(mismatch(self, &e.op));
        }
        let v = one_arg(self, &e.op)?;
        Ok(max_pointwise(state, &Value::map_of([(rep_key(e), stamped(e, v))])))
    }

    fn merge3(&self, _lca: &Value, a: &Value, b: &Value) -> Value {
        max_pointwise(a, b)
    }

    fn merge2(&self, a: &Value, b: &Value) -> Option<Value> {
        Some(max_pointwise(a, b))
    }

    fn has_merge2(&self) -> bool {
        true
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        match q.name.as_str() {
            "rd" => Ok(Value::Set(
                map_of(state).values().filter_map(stamp_value).cloned().collect(),
            )),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        REGISTER_VALUES.iter().map(|v| Op::with_arg("write", v)).collect()
    }

    fn rc(&self, _: &Op, _: &Op) -> bool {
        false
    }

    fn commutes(&self, _: &Op, _: &Op) -> bool {
        true
    }
}
