use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, Op, QueryOp};
use crate::value::Value;

/// Which merge the store uses: three-way with the LCA, or binary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Mrdt,
    Crdt,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Mrdt => "mrdt",
            Mode::Crdt => "crdt",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "mrdt" => Ok(Mode::Mrdt),
            "crdt" => Ok(Mode::Crdt),
            other => Err(Error::Invalid(format!("unknown mode `{other}`"))),
        }
    }
}

/// A datatype definition: initial state, `do`, merges, queries, the rc
/// relation and declared commutativity over a finite operation alphabet.
pub trait Mrdt: Send + Sync {
    fn name(&self) -> &str;

    fn init(&self) -> Value;

    fn apply(&self, state: &Value, e: &Event) -> Result<Value>;

    fn merge3(&self, lca: &Value, a: &Value, b: &Value) -> Value;

    /// Binary merge for state-based CRDT mode, when the datatype has one.
    fn merge2(&self, _a: &Value, _b: &Value) -> Option<Value> {
        None
    }

    fn has_merge2(&self) -> bool {
        false
    }

    fn query(&self, state: &Value, q: &QueryOp) -> Result<Value>;

    fn queries(&self) -> Vec<QueryOp>;

    /// Every update operation over the configured element alphabet.
    fn ops(&self) -> Vec<Op>;

    fn rc(&self, o1: &Op, o2: &Op) -> bool;

    fn commutes(&self, o1: &Op, o2: &Op) -> bool;
}

pub type MrdtSpec = Arc<dyn Mrdt>;

pub fn apply_event(spec: &dyn Mrdt, sigma: &Value, e: &Event) -> Result<Value> {
    spec.apply(sigma, e)
}

pub fn apply_sequence(spec: &dyn Mrdt, sigma: &Value, pi: &[Event]) -> Result<Value> {
    let mut state = sigma.clone();
    for e in pi {
        state = spec.apply(&state, e)?;
    }
    Ok(state)
}

pub fn query_state(spec: &dyn Mrdt, sigma: &Value, q: &QueryOp) -> Result<Value> {
    spec.query(sigma, q)
}

/// Merge in the given mode; CRDT mode drops the LCA argument.
pub fn merge_in(spec: &dyn Mrdt, mode: Mode, lca: &Value, a: &Value, b: &Value) -> Result<Value> {
    match mode {
        Mode::Mrdt => Ok(spec.merge3(lca, a, b)),
        Mode::Crdt => spec
            .merge2(a, b)
            .ok_or_else(|| Error::NoBinaryMerge(spec.name().to_string())),
    }
}

pub fn mismatch(spec: &dyn Mrdt, op: &Op) -> Error {
    Error::SpecMismatch {
        spec: spec.name().to_string(),
        op: op.to_string(),
    }
}

pub fn unknown_query(spec: &dyn Mrdt, q: &QueryOp) -> Error {
    Error::UnknownQuery {
        spec: spec.name().to_string(),
        query: q.to_string(),
    }
}
