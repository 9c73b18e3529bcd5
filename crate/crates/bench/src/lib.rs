//! Workloads shared by the benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mrdt_core::datatypes::{catalog_lookup, Alphabet};
use mrdt_core::{init_config, Configuration, ReplicaId};

/// A random execution over `replicas` branches with `events` operations,
/// merging every head into r0 at the end.
pub fn random_config(datatype: &str, replicas: u32, events: usize, seed: u64) -> Configuration {
    let spec = catalog_lookup(datatype, &Alphabet::default()).expect("known datatype");
    let ops = spec.ops();
    let mut c = init_config(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 1..replicas {
        c.create_branch(ReplicaId(r), ReplicaId(rng.gen_range(0..r))).unwrap();
    }
    let mut applied = 0;
    while applied < events {
        let r = ReplicaId(rng.gen_range(0..replicas));
        if rng.gen_bool(0.7) {
            let op = ops[rng.gen_range(0..ops.len())].clone();
            c.apply_op(r, op, None).unwrap();
            applied += 1;
        } else {
            let other = ReplicaId(rng.gen_range(0..replicas));
            if other != r {
                c.merge_replicas(r, other).unwrap();
            }
        }
    }
    for r in 1..replicas {
        c.merge_replicas(ReplicaId(0), ReplicaId(r)).unwrap();
    }
    c
}
