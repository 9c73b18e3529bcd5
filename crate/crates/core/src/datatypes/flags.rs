use std::collections::BTreeMap;

use super::{int_of, map_of, no_args, one_arg, rep_key, same_arg_different_kind, Alphabet};
use crate::error::Result;
use crate::event::{Event, Op, QueryOp};
use crate::spec::{mismatch, unknown_query, Mrdt};
use crate::value::Value;

/// The flag rule of the original enable-wins flag: agreeing flags win,
/// otherwise the side whose counter moved past the LCA decides.
fn merge_flag(l: (i64, bool), a: (i64, bool), b: (i64, bool)) -> bool {
    let ((lc, _), (ac, af), (bc, bf)) = (l, a, b);
    if af && bf {
        true
    } else if !af && !bf {
        false
    } else if af {
        ac > lc
    } else {
        bc > lc
    }
}

fn entry(v: Option<&Value>) -> (i64, bool) {
    match v.and_then(Value::as_tuple) {
        Some([c, f]) => (int_of(Some(c)), f.as_bool().unwrap_or(false)),
        _ => (0, false),
    }
}

fn entry_value((c, f): (i64, bool)) -> Value {
    Value::pair(Value::Int(c), Value::Bool(f))
}

/// One replica's entry: the larger counter wins, ties go to `merge_flag`.
fn merge_entry(l: (i64, bool), a: (i64, bool), b: (i64, bool)) -> (i64, bool) {
    if a.0 > b.0 {
        a
    } else if b.0 > a.0 {
        b
    } else {
        (a.0, merge_flag(l, a, b))
    }
}

/// Per-replica (counter, flag) entries.
mod entries {
    use super::*;

    pub fn raise(m: &Value, rep: Value) -> Value {
        let mut m = map_of(m);
        let (c, _) = entry(m.get(&rep));
        m.insert(rep, entry_value((c + 1, true)));
        Value::Map(m)
    }

    pub fn clear(m: &Value) -> Value {
        Value::Map(
            map_of(m)
                .into_iter()
                .map(|(k, v)| (k, entry_value((entry(Some(&v)).0, false))))
                .collect(),
        )
    }

    pub fn merge(l: &Value, a: &Value, b: &Value) -> Value {
        let (lm, am, bm) = (map_of(l), map_of(a), map_of(b));
        let mut out = BTreeMap::new();
        for k in am.keys().chain(bm.keys()) {
            let e = merge_entry(entry(lm.get(k)), entry(am.get(k)), entry(bm.get(k)));
            out.insert(k.clone(), entry_value(e));
        }
        Value::Map(out)
    }

    pub fn any_raised(m: &Value) -> bool {
        map_of(m).values().any(|v| entry(Some(v)).1)
    }
}

fn flag_ops() -> Vec<Op> {
    vec![Op::new("enable"), Op::new("disable")]
}

fn flag_kind(spec: &dyn Mrdt, op: &Op) -> Result<bool> {
    no_args(spec, op)?;
    match op.name.as_str() {
        "enable" => Ok(true),
        "disable" => Ok(false),
        _ => Err(mismatch(spec, op)),
    }
}

/// The enable-wins flag with a single (counter, flag) pair.
pub struct EwFlagBuggy;

impl Mrdt for EwFlagBuggy {
    fn name(&self) -> &str {
        "ewflag-buggy"
    }

    fn init(&self) -> Value {
        entry_value((0, false))
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        let (c, _) = entry(Some(state));
        Ok(if flag_kind(self, &e.op)? {
            entry_value((c + 1, true))
        } else {
            entry_value((c, false))
        })
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        let (l, a, b) = (entry(Some(lca)), entry(Some(a)), entry(Some(b)));
        entry_value((a.0 + b.0 - l.0, merge_flag(l, a, b)))
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        match q.name.as_str() {
            "rd" => Ok(Value::Bool(entry(Some(state)).1)),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        flag_ops()
    }

    fn rc(&self, o1: &Op, o2: &Op) -> bool {
        o1.name == "disable" && o2.name == "enable"
    }

    fn commutes(&self, o1: &Op, o2: &Op) -> bool {
        o1.name == o2.name
    }
}

/// Enable-wins flag with one (counter, flag) entry per replica.
pub struct EwFlag;

impl Mrdt for EwFlag {
    fn name(&self) -> &str {
        "ewflag"
    }

    fn init(&self) -> Value {
        Value::empty_map()
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        Ok(if flag_kind(self, &e.op)? {
            entries::raise(state, rep_key(e))
        } else {
            entries::clear(state)
        })
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        entries::merge(lca, a, b)
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        match q.name.as_str() {
            "rd" => Ok(Value::Bool(entries::any_raised(state))),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        flag_ops()
    }

    fn rc(&self, o1: &Op, o2: &Op) -> bool {
        o1.name == "disable" && o2.name == "enable"
    }

    fn commutes(&self, o1: &Op, o2: &Op) -> bool {
        o1.name == o2.name
    }
}

// Disable-wins state: whether any enable has happened, plus per-replica
// (counter, flag) entries recording disables. Enable clears the disable
// flags, so the entries behave like an enable-wins flag over disables.
fn dw_parts(v: &Value) -> (bool, Value) {
    match v.as_tuple() {
        Some([ever, m]) => (ever.as_bool().unwrap_or(false), m.clone()),
        _ => (false, Value::empty_map()),
    }
}

fn dw_init() -> Value {
    Value::pair(Value::Bool(false), Value::empty_map())
}

fn dw_apply(state: &Value, enable: bool, rep: Value) -> Value {
    let (ever, m) = dw_parts(state);
    if enable {
        Value::pair(Value::Bool(true), entries::clear(&m))
    } else {
        Value::pair(Value::Bool(ever), entries::raise(&m, rep))
    }
}

fn dw_merge(l: &Value, a: &Value, b: &Value) -> Value {
    let ((_, lm), (ae, am), (be, bm)) = (dw_parts(l), dw_parts(a), dw_parts(b));
    Value::pair(Value::Bool(ae || be), entries::merge(&lm, &am, &bm))
}

fn dw_read(state: &Value) -> bool {
    let (ever, m) = dw_parts(state);
    ever && !entries::any_raised(&m)
}

/// Disable-wins flag.
pub struct DwFlag;

impl Mrdt for DwFlag {
    fn name(&self) -> &str {
        "dwflag"
    }

    fn init(&self) -> Value {
        dw_init()
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        Ok(dw_apply(state, flag_kind(self, &e.op)?, rep_key(e)))
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        dw_merge(lca, a, b)
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        match q.name.as_str() {
            "rd" => Ok(Value::Bool(dw_read(state))),
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        flag_ops()
    }

    fn rc(&self, o1: &Op, o2: &Op) -> bool {
        o1.name == "enable" && o2.name == "disable"
    }

    fn commutes(&self, o1: &Op, o2: &Op) -> bool {
        o1.name == o2.name
    }
}

/// Remove-wins set: a disable-wins flag per element.
pub struct RwSet {
    alphabet: Alphabet,
}

impl RwSet {
    pub fn new(alphabet: Alphabet) -> Self {
        RwSet { alphabet }
    }
}

impl Mrdt for RwSet {
    fn name(&self) -> &str {
        "rwset"
    }

    fn init(&self) -> Value {
        Value::empty_map()
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        let x = Value::str(one_arg(self, &e.op)?);
        let enable = match e.op.name.as_str() {
            "add" => true,
            "rem" => false,
            _ => return Err(mismatch(self, &e.op)),
        };
        let mut m = map_of(state);
        let flag = m.get(&x).cloned().unwrap_or_else(dw_init);
        m.insert(x, dw_apply(&flag, enable, rep_key(e)));
        Ok(Value::Map(m))
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        let (lm, am, bm) = (map_of(lca), map_of(a), map_of(b));
        let mut out = BTreeMap::new();
        for k in am.keys().chain(bm.keys()) {
            let get = |m: &BTreeMap<Value, Value>| m.get(k).cloned().unwrap_or_else(dw_init);
            out.insert(k.clone(), dw_merge(&get(&lm), &get(&am), &get(&bm)));
        }
        Value::Map(out)
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        let members = Value::Set(
            map_of(state)
                .into_iter()
                .filter(|(_, f)| dw_read(f))
                .map(|(k, _)| k)
                .collect(),
        );
        match q.name.as_str() {
            "rd" => Ok(members),
            "contains" => {
                let x = one_arg(self, q)?;
                Ok(Value::Bool(members.as_set().unwrap().contains(&Value::str(x))))
            }
            _ => Err(unknown_query(self, q)),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        vec![Op::new("rd")]
    }

    fn ops(&self) -> Vec<Op> {
        let mut ops = Vec::new();
        for x in self.alphabet.iter() {
            ops.push(Op::with_arg("add", x));
            ops.push(Op::with_arg("rem", x));
        }
        ops
    }

    fn rc(&self, o1: &Op, o2: &Op) -> bool {
        o1.name == "add" && o2.name == "rem" && o1.args == o2.args
    }

    fn commutes(&self, o1: &Op, o2: &Op) -> bool {
        !same_arg_different_kind(o1, o2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::apply_sequence;

    fn ev(t: u64, r: u32, name: &str) -> Event {
        Event::new(t, r, Op::new(name))
    }

    fn rd(spec: &dyn Mrdt, s: &Value) -> Value {
        spec.query(s, &Op::new("rd")).unwrap()
    }

    #[test]
    fn buggy_flag_do_matches_listing() {
        let s = EwFlagBuggy.apply(&EwFlagBuggy.init(), &ev(1, 0, "enable")).unwrap();
        assert_eq!(s, entry_value((1, true)));
        let s = EwFlagBuggy.apply(&s, &ev(2, 0, "disable")).unwrap();
        assert_eq!(s, entry_value((1, false)));
    }

    #[test]
    fn buggy_flag_diverges_on_counter_aliasing() {
        // Two branches with one enable each but different histories merge to
        // states that read differently although they saw the same events.
        let spec = EwFlagBuggy;
        let l = entry_value((1, true));
        let a = entry_value((1, false));
        let b = entry_value((2, true));
        assert_eq!(rd(&spec, &spec.merge3(&l, &a, &b)), Value::Bool(true));
    }

    #[test]
    fn fixed_flag_concurrent_enable_wins() {
        let spec = EwFlag;
        let l = spec.init();
        let a = spec.apply(&l, &ev(1, 1, "enable")).unwrap();
        let b = spec.apply(&l, &ev(2, 2, "disable")).unwrap();
        assert_eq!(rd(&spec, &spec.merge3(&l, &a, &b)), Value::Bool(true));
    }

    #[test]
    fn fixed_flag_disable_after_enable_wins() {
        let spec = EwFlag;
        let l = spec.apply(&spec.init(), &ev(1, 1, "enable")).unwrap();
        let a = l.clone();
        let b = spec.apply(&l, &ev(2, 2, "disable")).unwrap();
        assert_eq!(rd(&spec, &spec.merge3(&l, &a, &b)), Value::Bool(false));
    }

    #[test]
    fn dwflag_concurrent_disable_wins() {
        let spec = DwFlag;
        let l = spec.apply(&spec.init(), &ev(1, 0, "enable")).unwrap();
        let a = spec.apply(&l, &ev(2, 1, "enable")).unwrap();
        let b = spec.apply(&l, &ev(3, 2, "disable")).unwrap();
        assert_eq!(rd(&spec, &spec.merge3(&l, &a, &b)), Value::Bool(false));
        let seq = apply_sequence(&spec, &spec.init(), &[ev(1, 0, "disable"), ev(2, 0, "enable")]).unwrap();
        assert_eq!(rd(&spec, &seq), Value::Bool(true));
        assert_eq!(rd(&spec, &spec.init()), Value::Bool(false));
    }

    #[test]
    fn rwset_concurrent_remove_wins() {
        let spec = RwSet::new(Alphabet::default());
        let l = spec.init();
        let a = spec.apply(&l, &Event::new(1, 1, Op::with_arg("add", "a"))).unwrap();
        let b = spec.apply(&l, &Event::new(2, 2, Op::with_arg("rem", "a"))).unwrap();
        assert_eq!(rd(&spec, &spec.merge3(&l, &a, &b)), Value::empty_set());
        assert_eq!(rd(&spec, &a), Value::set_of([Value::str("a")]));
    }
}
