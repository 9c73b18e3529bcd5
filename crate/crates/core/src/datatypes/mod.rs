//! Concrete datatypes and the name-indexed catalog.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::event::{Event, Op};
use crate::spec::{mismatch, Mode, Mrdt, MrdtSpec};
use crate::value::Value;

mod counters;
mod flags;
mod json;
mod registers;
mod rga;
mod sets;

pub use counters::{Counter, GCounter, PnCounter};
pub use flags::{DwFlag, EwFlag, EwFlagBuggy, RwSet};
pub use json::{json_compose, JsonKey, JsonMrdt};
pub use registers::{GMap, Mvr, OptReg, SwMap};
pub use rga::Rga;
pub use sets::{orset_merge, GSet, OrSet, OrSetEfficient, OrSetTomb, TwoPSet};

pub const DEFAULT_ALPHABET: [&str; 5] = ["a", "b", "c", "d", "e"];

/// Values written by register-like operations.
pub const REGISTER_VALUES: [&str; 2] = ["x", "y"];

/// Finite element alphabet used by parameterized operations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet(pub Vec<String>);

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet(DEFAULT_ALPHABET.iter().map(|s| s.to_string()).collect())
    }
}

impl Alphabet {
    pub fn parse(text: &str) -> Result<Alphabet> {
        let items: Vec<String> = text
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if items.is_empty() {
            return Err(Error::Invalid("empty alphabet".into()));
        }
        Ok(Alphabet(items))
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn joined(&self) -> String {
        self.0.join(",")
    }
}

#[derive(Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub rc_policy_doc: &'static str,
    pub mrdt: Option<MrdtSpec>,
    pub crdt: Option<MrdtSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryMode {
    Mrdt,
    Crdt,
    Both,
}

impl CatalogEntry {
    pub fn mode(&self) -> EntryMode {
        match (&self.mrdt, &self.crdt) {
            (Some(_), Some(_)) => EntryMode::Both,
            (None, Some(_)) => EntryMode::Crdt,
            _ => EntryMode::Mrdt,
        }
    }

    pub fn spec_for(&self, mode: Mode) -> Option<MrdtSpec> {
        match mode {
            Mode::Mrdt => self.mrdt.clone(),
            Mode::Crdt => self.crdt.clone(),
        }
    }
}

pub const CATALOG_NAMES: [&str; 17] = [
    "counter",
    "gcounter",
    "pn-counter",
    "gset",
    "gmap",
    "orset",
    "orset-efficient",
    "rwset",
    "ewflag",
    "ewflag-buggy",
    "dwflag",
    "swmap",
    "mvr",
    "optreg",
    "rga",
    "2p-set",
    "json",
];

fn both(spec: MrdtSpec) -> (Option<MrdtSpec>, Option<MrdtSpec>) {
    (Some(spec.clone()), Some(spec))
}

fn mrdt_only(spec: MrdtSpec) -> (Option<MrdtSpec>, Option<MrdtSpec>) {
    (Some(spec), None)
}

/// Catalog entry by name. `json(id:type,...)` builds a composite over the
/// named component types; plain `json` uses counter, orset and ewflag.
pub fn catalog_entry(name: &str, alphabet: &Alphabet) -> Result<CatalogEntry> {
    if name == "json" || name.starts_with("json(") {
        let spec: MrdtSpec = Arc::new(parse_json(name, alphabet)?);
        return Ok(CatalogEntry {
            name: "json",
            rc_policy_doc: "set(k,o1) rc set(k,o2) iff (o1,o2) in the component's rc",
            mrdt: Some(spec),
            crdt: None,
        });
    }
    let a = alphabet.clone();
    let (static_name, doc, (mrdt, crdt)): (&'static str, &'static str, _) = match name {
        "counter" => ("counter", "none", mrdt_only(Arc::new(Counter))),
        "gcounter" => ("gcounter", "none", both(Arc::new(GCounter))),
        "pn-counter" => ("pn-counter", "none", both(Arc::new(PnCounter))),
        "gset" => ("gset", "none", both(Arc::new(GSet::new(a)))),
        "gmap" => ("gmap", "none", both(Arc::new(GMap::new(a)))),
        "orset" => (
            "orset",
            "rem_a rc add_a",
            (
                Some(Arc::new(OrSet::new(a.clone())) as MrdtSpec),
                Some(Arc::new(OrSetTomb::new(a)) as MrdtSpec),
            ),
        ),
        "orset-efficient" => (
            "orset-efficient",
            "rem_a rc add_a",
            mrdt_only(Arc::new(OrSetEfficient::new(a))),
        ),
        "rwset" => ("rwset", "add_a rc rem_a", mrdt_only(Arc::new(RwSet::new(a)))),
        "ewflag" => ("ewflag", "disable rc enable", mrdt_only(Arc::new(EwFlag))),
        "ewflag-buggy" => ("ewflag-buggy", "disable rc enable", mrdt_only(Arc::new(EwFlagBuggy))),
        "dwflag" => ("dwflag", "enable rc disable", mrdt_only(Arc::new(DwFlag))),
        "swmap" => ("swmap", "del_k rc set_k", mrdt_only(Arc::new(SwMap::new(a)))),
        "mvr" => ("mvr", "none", both(Arc::new(Mvr))),
        "optreg" => ("optreg", "unset rc set", mrdt_only(Arc::new(OptReg))),
        "rga" => ("rga", "none", both(Arc::new(Rga::new(a)))),
        "2p-set" => ("2p-set", "none", both(Arc::new(TwoPSet::new(a)))),
        other => return Err(Error::UnknownDatatype(other.to_string())),
    };
    Ok(CatalogEntry {
        name: static_name,
        rc_policy_doc: doc,
        mrdt,
        crdt,
    })
}

/// The MRDT-mode spec when there is one, otherwise the CRDT-mode spec.
pub fn catalog_lookup(name: &str, alphabet: &Alphabet) -> Result<MrdtSpec> {
    let entry = catalog_entry(name, alphabet)?;
    entry
        .mrdt
        .or(entry.crdt)
        .ok_or_else(|| Error::UnknownDatatype(name.to_string()))
}

pub fn lookup_for_mode(name: &str, mode: Mode, alphabet: &Alphabet) -> Result<MrdtSpec> {
    catalog_entry(name, alphabet)?
        .spec_for(mode)
        .ok_or_else(|| Error::Invalid(format!("datatype `{name}` has no {mode} variant")))
}

fn parse_json(name: &str, alphabet: &Alphabet) -> Result<JsonMrdt> {
    let body = if name == "json" {
        "n:counter,s:orset,f:ewflag"
    } else {
        name.strip_prefix("json(")
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| Error::UnknownDatatype(name.to_string()))?
    };
    let mut components = Vec::new();
    for part in body.split(',') {
        let (id, vtype) = part
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::UnknownDatatype(name.to_string()))?;
        if vtype.starts_with("json") {
            return Err(Error::Invalid("nested json components are not supported".into()));
        }
        let spec = catalog_lookup(vtype, alphabet)?;
        components.push((JsonKey::new(id, vtype), spec));
    }
    json_compose(components)
}

// ---- helpers shared by the datatype modules ----

pub(crate) fn rep_key(e: &Event) -> Value {
    Value::Int(e.rep.0 as i64)
}

pub(crate) fn one_arg<'a>(spec: &dyn Mrdt, op: &'a Op) -> Result<&'a str> {
    match (op.args.as_slice(), &op.inner) {
        ([a], None) => Ok(a.as_str()),
        _ => Err(mismatch(spec, op)),
    }
}

pub(crate) fn no_args(spec: &dyn Mrdt, op: &Op) -> Result<()> {
    if op.args.is_empty() && op.inner.is_none() {
        Ok(())
    } else {
        Err(mismatch(spec, op))
    }
}

pub(crate) fn map_of(v: &Value) -> BTreeMap<Value, Value> {
    v.as_map().cloned().unwrap_or_default()
}

pub(crate) fn int_of(v: Option<&Value>) -> i64 {
    v.and_then(Value::as_int).unwrap_or(0)
}

/// Same element, different operation kinds: the only non-commuting pairs
/// of the set-like types.
pub(crate) fn same_arg_different_kind(o1: &Op, o2: &Op) -> bool {
    o1.name != o2.name && o1.args.first() == o2.args.first()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        let alpha = Alphabet::default();
        for name in CATALOG_NAMES {
            let entry = catalog_entry(name, &alpha).unwrap();
            assert!(entry.mrdt.is_some() || entry.crdt.is_some(), "{name}");
        }
        assert!(matches!(
            catalog_lookup("queue", &alpha),
            Err(Error::UnknownDatatype(_))
        ));
    }

    #[test]
    fn crdt_roster_has_binary_merges() {
        let alpha = Alphabet::default();
        for name in ["gcounter", "pn-counter", "gset", "gmap", "orset", "2p-set", "mvr"] {
            let spec = lookup_for_mode(name, Mode::Crdt, &alpha).unwrap();
            assert!(spec.has_merge2(), "{name}");
            let s0 = spec.init();
            assert_eq!(spec.merge2(&s0, &s0), Some(s0));
        }
    }

    #[test]
    fn rc_implies_non_commuting_everywhere() {
        let alpha = Alphabet::default();
        for name in CATALOG_NAMES {
            let entry = catalog_entry(name, &alpha).unwrap();
            for spec in entry.mrdt.iter().chain(entry.crdt.iter()) {
                let ops = spec.ops();
                for o1 in &ops {
                    for o2 in &ops {
                        if spec.rc(o1, o2) {
                            assert!(!spec.commutes(o1, o2), "{name}: {o1} {o2}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn alphabet_parse() {
        assert_eq!(Alphabet::parse("a, b").unwrap().0, vec!["a", "b"]);
        assert!(Alphabet::parse(" ,").is_err());
    }
}
