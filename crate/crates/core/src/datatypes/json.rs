use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::event::{Event, Op, QueryOp};
use crate::spec::{mismatch, unknown_query, Mrdt, MrdtSpec};
use crate::value::Value;

/// A JSON field: its name and the catalog name of its value type.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JsonKey {
    pub id: String,
    pub vtype: String,
}

impl JsonKey {
    pub fn new(id: &str, vtype: &str) -> JsonKey {
        JsonKey {
            id: id.to_string(),
            vtype: vtype.to_string(),
        }
    }

    pub fn parse(text: &str) -> Option<JsonKey> {
        let (id, vtype) = text.split_once(':')?;
        Some(JsonKey::new(id, vtype))
    }
}

impl fmt::Display for JsonKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.id, self.vtype)
    }
}

/// Map from registered keys to component states. Operations are
/// `set(key, op)` and queries `get(key, q)`, both delegating to the
/// component registered under `key`.
pub struct JsonMrdt {
    name: String,
    components: BTreeMap<String, MrdtSpec>,
}

pub fn json_compose(components: Vec<(JsonKey, MrdtSpec)>) -> Result<JsonMrdt> {
    if components.is_empty() {
        return Err(Error::Invalid("json composite needs at least one key".into()));
    }
    let mut map = BTreeMap::new();
    for (k, spec) in components {
        if spec.name() != k.vtype {
            return Err(Error::Invalid(format!("key {k} holds a `{}`", spec.name())));
        }
        if map.insert(k.to_string(), spec).is_some() {
            return Err(Error::Invalid(format!("duplicate key {k}")));
        }
    }
    let name = format!("json({})", map.keys().cloned().collect::<Vec<_>>().join(","));
    Ok(JsonMrdt { name, components: map })
}

impl JsonMrdt {
    pub fn keys(&self) -> impl Iterator<Item = JsonKey> + '_ {
        self.components.keys().filter_map(|k| JsonKey::parse(k))
    }

    fn component<'a>(&'a self, op: &'a Op, verb: &str) -> Result<(&'a str, &'a MrdtSpec, &'a Op)> {
        match (op.name.as_str(), op.args.as_slice(), &op.inner) {
            (n, [k], Some(inner)) if n == verb => {
                let spec = self
                    .components
                    .get(k)
                    .ok_or_else(|| Error::UnregisteredKey(k.clone()))?;
                Ok((k.as_str(), spec, inner))
            }
            _ => Err(mismatch(self, op)),
        }
    }

    fn split(op: &Op) -> Option<(&str, &Op)> {
        match (op.name.as_str(), op.args.as_slice(), &op.inner) {
            ("set", [k], Some(inner)) => Some((k.as_str(), inner)),
            _ => None,
        }
    }

    fn slot(&self, state: &Value, key: &str) -> Value {
        state
            .as_map()
            .and_then(|m| m.get(&Value::str(key)).cloned())
            .unwrap_or_else(|| self.components[key].init())
    }
}

impl Mrdt for JsonMrdt {
    fn name(&self) -> &str {
        &self.name
    }

    fn init(&self) -> Value {
        Value::Map(
            self.components
                .iter()
                .map(|(k, spec)| (Value::str(k.as_str()), spec.init()))
                .collect(),
        )
    }

    fn apply(&self, state: &Value, e: &Event) -> Result<Value> {
        let (key, spec, inner) = self.component(&e.op, "set")?;
        let inner_event = Event {
            ts: e.ts,
            rep: e.rep,
            op: inner.clone(),
        };
        let next = spec.apply(&self.slot(state, key), &inner_event)?;
        let mut m = state.as_map().cloned().unwrap_or_default();
        m.insert(Value::str(key), next);
        Ok(Value::Map(m))
    }

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value {
        Value::Map(
            self.components
                .iter()
                .map(|(k, spec)| {
                    let merged = spec.merge3(&self.slot(lca, k), &self.slot(a, k), &self.slot(b, k));
                    (Value::str(k.as_str()), merged)
                })
                .collect(),
        )
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value> {
        if q.name == "rd" && q.args.is_empty() && q.inner.is_none() {
            let mut out = BTreeMap::new();
            for (k, spec) in &self.components {
                out.insert(
                    Value::str(k.as_str()),
                    spec.query(&self.slot(state, k), &Op::new("rd"))?,
                );
            }
            return Ok(Value::Map(out));
        }
        match self.component(q, "get") {
            Ok((key, spec, inner)) => spec.query(&self.slot(state, key), inner),
            Err(Error::SpecMismatch { .. }) => Err(unknown_query(self, q)),
            Err(e) => Err(e),
        }
    }

    fn queries(&self) -> Vec<QueryOp> {
        let mut qs = vec![Op::new("rd")];
        for (k, spec) in &self.components {
            qs.extend(spec.queries().into_iter().map(|q| Op::nested("get", k, q)));
        }
        qs
    }

    fn ops(&self) -> Vec<Op> {
        self.components
            .iter()
            .flat_map(|(k, spec)| spec.ops().into_iter().map(move |o| Op::nested("set", k, o)))
            .collect()
    }

    fn rc(&self, o1: &Op, o2: &Op) -> bool {
        match (Self::split(o1), Self::split(o2)) {
            (Some((k1, i1)), Some((k2, i2))) if k1 == k2 => self.components.get(k1).is_some_and(|s| s.rc(i1, i2)),
            _ => false,
        }
    }

    fn commutes(&self, o1: &Op, o2: &Op) -> bool {
        match (Self::split(o1), Self::split(o2)) {
            (Some((k1, i1)), Some((k2, i2))) if k1 == k2 => self.components.get(k1).is_none_or(|s| s.commutes(i1, i2)),
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datatypes::{catalog_lookup, Alphabet};

    fn composite(parts: &[(&str, &str)]) -> JsonMrdt {
        let alpha = Alphabet::default();
        json_compose(
            parts
                .iter()
                .map(|(id, t)| (JsonKey::new(id, t), catalog_lookup(t, &alpha).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn set_then_get_delegates() {
        let j = composite(&[("n", "counter")]);
        let s = j
            .apply(
                &j.init(),
                &Event::new(1, 0, Op::nested("set", "n:counter", Op::new("inc"))),
            )
            .unwrap();
        let q = Op::nested("get", "n:counter", Op::new("rd"));
        assert_eq!(j.query(&s, &q).unwrap(), Value::Int(1));
    }

    #[test]
    fn rc_only_within_a_key() {
        let j = composite(&[("s", "orset"), ("t", "orset")]);
        let rem = |k: &str| Op::nested("set", k, Op::with_arg("rem", "a"));
        let add = |k: &str| Op::nested("set", k, Op::with_arg("add", "a"));
        assert!(j.rc(&rem("s:orset"), &add("s:orset")));
        assert!(!j.rc(&rem("s:orset"), &add("t:orset")));
        assert!(j.commutes(&rem("s:orset"), &add("t:orset")));
    }

    #[test]
    fn untouched_keys_merge_to_initial() {
        let j = composite(&[("n", "counter"), ("f", "ewflag")]);
        let s0 = j.init();
        assert_eq!(j.merge3(&s0, &s0, &s0), s0);
    }

    #[test]
    fn unregistered_key_is_an_error() {
        let j = composite(&[("n", "counter")]);
        let e = Event::new(1, 0, Op::nested("set", "m:counter", Op::new("inc")));
        assert!(matches!(j.apply(&j.init(), &e), Err(Error::UnregisteredKey(_))));
        let q = Op::nested("get", "m:counter", Op::new("rd"));
        assert!(matches!(j.query(&j.init(), &q), Err(Error::UnregisteredKey(_))));
    }
}
