//! Sequential against rayon-parallel sweeps over the same cell grid.

use criterion::{criterion_group, criterion_main, Criterion};

use proact_core::config::{Condition, PolicyKind};
use proact_core::harness::sweep::{grid, study_config, sweep_sequential};

fn bench_sweep(c: &mut Criterion) {
    let mut base = study_config();
    base.ticks = 1500;
    let cells = grid(
        &[Condition::Slow, Condition::Medium, Condition::Fast],
        &[PolicyKind::Cooperative, PolicyKind::Silent],
        0..4,
    );
    let mut group = c.benchmark_group("sweep_24_cells");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| sweep_sequential(&base, &cells)));
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| proact_core::harness::sweep::sweep_parallel(&base, &cells))
    });
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
