use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use ers_bench::{contributor, registry};
use ers_core::model::{EntityId, NodeName};
use ers_core::registry::bench::{self, pool_entity, BenchConfig, Mix, TxKind};
use ers_core::registry::{AtomicOp, LockTable};
use ers_core::store::{Role, Store};
use ers_core::sync::sync_session;
use ers_core::time::VTime;

fn copies(c: &mut Criterion) {
    let base = registry(64);
    let mut g = c.benchmark_group("copy");
    for (name, op) in [
        ("shallow", AtomicOp::ShallowCopy { source: pool_entity(7), target: EntityId::mint("bench", "copy").unwrap() }),
        ("deep", AtomicOp::DeepCopy { source: pool_entity(7), target: EntityId::mint("bench", "copy").unwrap() }),
    ] {
        g.bench_function(name, |b| {
            b.iter_batched(|| base.clone(), |mut r| r.apply(&op).unwrap(), BatchSize::SmallInput)
        });
    }
    g.finish();
}

fn locks(c: &mut Criterion) {
    let ops: Vec<AtomicOp> = (0..8).map(|i| AtomicOp::InsertLink(pool_entity(i), pool_entity(i + 1))).collect();
    let keys = ers_core::registry::lock_demand(&ops);
    c.bench_function("lock acquire+release", |b| {
        let mut table = LockTable::new();
        b.iter(|| {
            assert!(table.try_acquire(1, &keys));
            table.release(1);
        })
    });
}

fn virtual_bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("bench-tx");
    g.sample_size(10);
    for pool in [1024, 16, 1] {
        g.bench_with_input(BenchmarkId::new("links", pool), &pool, |b, &pool| {
            b.iter(|| bench::run(&BenchConfig::new(32, 50, pool, 42)))
        });
    }
    for kind in [TxKind::Sc, TxKind::Dc] {
        let mut cfg = BenchConfig::new(32, 50, 1024, 42);
        cfg.mix = Mix::only(kind);
        g.bench_function(kind.as_str(), |b| b.iter(|| bench::run(&cfg)));
    }
    g.finish();
}

fn sync(c: &mut Criterion) {
    let source = contributor("xo1", 1000);
    c.bench_function("sync 1000 docs to bridge", |b| {
        b.iter_batched(
            || (source.clone(), Store::new(NodeName::new("b1").unwrap(), Role::Bridge)),
            |(mut a, mut bridge)| sync_session(&mut a, &mut bridge, 1000, VTime(1.0)).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, copies, locks, virtual_bench, sync);
criterion_main!(benches);
