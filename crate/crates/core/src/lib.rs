//! Mergeable replicated datatypes over a versioned replica store, with a
//! linearizability checker and a bounded verification-condition suite.

pub mod datatypes;
pub mod error;
pub mod event;
pub mod lincheck;
pub mod spec;
pub mod store;
pub mod value;
pub mod vcsuite;

pub use datatypes::{catalog_entry, catalog_lookup, lookup_for_mode, Alphabet, CatalogEntry};
pub use error::{Error, Result};
pub use event::{Event, EventSeq, Op, QueryOp, ReplicaId, Timestamp};
pub use spec::{apply_event, apply_sequence, merge_in, query_state, Mode, Mrdt, MrdtSpec};
pub use store::{init_config, Configuration, StepOutcome, Transition, Version, VersionId};
pub use value::Value;
pub use vcsuite::{gen_feasible_triple, run_full_suite, run_vc, FeasibleTriple, VcReport};
