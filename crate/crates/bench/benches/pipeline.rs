//! End-to-end pipeline runs on planted instances.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cyclerank_bench::planted_cycle;
use cyclerank_core::{approx_cycle_rank, PipelineConfig};
use std::hint::black_box;

fn bench_approx_cycle(c: &mut Criterion) {
    let mut group = c.benchmark_group("approx_cycle_rank");
    group.sample_size(10);
    for n in [12usize, 20] {
        let a = planted_cycle(n, 2, 5);
        let mut cfg = PipelineConfig::new(2, 0.5, 17);
        cfg.starts = 4;
        cfg.max_sweeps = 40;
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| approx_cycle_rank(black_box(a), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_approx_cycle);
criterion_main!(benches);
