use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReplicaId(pub u32);

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// An update or query operation: a tag, string parameters, and for composite
/// types an operation of a component type.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Op {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Box<Op>>,
}

/// Query operations share the update-operation shape.
pub type QueryOp = Op;

impl Op {
    pub fn new(name: &str) -> Op {
        Op {
            name: name.to_string(),
            args: Vec::new(),
            inner: None,
        }
    }

    pub fn with_arg(name: &str, arg: &str) -> Op {
        Op {
            name: name.to_string(),
            args: vec![arg.to_string()],
            inner: None,
        }
    }

    pub fn with_args(name: &str, args: &[&str]) -> Op {
        Op {
            name: name.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
            inner: None,
        }
    }

    pub fn nested(name: &str, arg: &str, inner: Op) -> Op {
        Op {
            name: name.to_string(),
            args: vec![arg.to_string()],
            inner: Some(Box::new(inner)),
        }
    }

    pub fn arg(&self, i: usize) -> Option<&str> {
        self.args.get(i).map(String::as_str)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if self.args.is_empty() && self.inner.is_none() {
            return Ok(());
        }
        f.write_str("(")?;
        let mut first = true;
        for a in &self.args {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            f.write_str(a)?;
        }
        if let Some(inner) = &self.inner {
            if !first {
                f.write_str(", ")?;
            }
            write!(f, "{inner}")?;
        }
        f.write_str(")")
    }
}

/// One update-operation instance. Identity is the timestamp alone.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Event {
    pub ts: Timestamp,
    pub rep: ReplicaId,
    pub op: Op,
}

impl Event {
    pub fn new(ts: u64, rep: u32, op: Op) -> Event {
        Event {
            ts: Timestamp(ts),
            rep: ReplicaId(rep),
            op,
        }
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.ts == other.ts
    }
}

impl Eq for Event {}

impl Hash for Event {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.ts.hash(state);
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ts.cmp(&other.ts)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{},{}>", self.ts.0, self.rep.0, self.op)
    }
}

/// Events in application order; applying `[e1, e2]` to σ gives e2(e1(σ)).
pub type EventSeq = Vec<Event>;

pub fn has_unique_timestamps(seq: &[Event]) -> bool {
    let mut seen = std::collections::BTreeSet::new();
    seq.iter().all(|e| seen.insert(e.ts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_is_by_timestamp() {
        let a = Event::new(3, 1, Op::new("inc"));
        let b = Event::new(3, 2, Op::with_arg("add", "a"));
        assert_eq!(a, b);
        assert_ne!(a, Event::new(4, 1, Op::new("inc")));
    }

    #[test]
    fn op_display() {
        let op = Op::nested("set", "s:orset", Op::with_arg("add", "a"));
        assert_eq!(op.to_string(), "set(s:orset, add(a))");
        assert_eq!(Op::new("inc").to_string(), "inc");
    }

    #[test]
    fn op_json_roundtrip() {
        let op = Op::nested("set", "n:counter", Op::new("inc"));
        let text = serde_json::to_string(&op).unwrap();
        assert_eq!(text, r#"{"name":"set","args":["n:counter"],"inner":{"name":"inc"}}"#);
        let back: Op = serde_json::from_str(&text).unwrap();
        assert_eq!(back, op);
    }
}
