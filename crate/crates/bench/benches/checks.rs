use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use mrdt_bench::random_config;
use mrdt_core::datatypes::{catalog_lookup, Alphabet};
use mrdt_core::lincheck::{check_replica_linearizable, compute_lo, LinOptions};
use mrdt_core::vcsuite::run_vc;
use mrdt_core::{Mode, ReplicaId};

fn merge(c: &mut Criterion) {
    let mut g = c.benchmark_group("merge3");
    for name in ["orset", "ewflag", "rga"] {
        let cfg = random_config(name, 3, 24, 1);
        let spec = cfg.spec().clone();
        let heads: Vec<_> = cfg.heads().values().copied().collect();
        let (a, b) = (heads[0], heads[1]);
        let (l, _) = cfg.resolve_lca_state(a, b).unwrap();
        let (sa, sb) = (
            cfg.version(a).unwrap().state.clone(),
            cfg.version(b).unwrap().state.clone(),
        );
        g.bench_function(name, |bn| {
            bn.iter(|| spec.merge3(black_box(&l), black_box(&sa), black_box(&sb)))
        });
    }
    g.finish();
}

fn lincheck(c: &mut Criterion) {
    let mut g = c.benchmark_group("lincheck");
    for events in [4, 8] {
        let cfg = random_config("orset", 3, events, 2);
        g.bench_function(format!("lo/orset/{events}"), |b| {
            b.iter(|| compute_lo(black_box(&cfg)).unwrap())
        });
        let opts = LinOptions::default();
        g.bench_function(format!("replica/orset/{events}"), |b| {
            b.iter(|| check_replica_linearizable(black_box(&cfg), ReplicaId(0), &opts).unwrap())
        });
    }
    g.finish();
}

fn vc_row(c: &mut Criterion) {
    let spec = catalog_lookup("orset", &Alphabet::default()).unwrap();
    let mut g = c.benchmark_group("vc");
    g.sample_size(10);
    for row in ["psi-Ltopb-ind-2op", "psi-L2b-ind2-1op"] {
        g.bench_function(row, |b| b.iter(|| run_vc(&spec, row, Mode::Mrdt, 100, 7).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, merge, lincheck, vc_row);
criterion_main!(benches);
