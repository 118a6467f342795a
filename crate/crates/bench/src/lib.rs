//! Shared instance generators for the benchmarks.

use cyclerank_core::rng::{stream_rng, STREAM_MISC};
use cyclerank_core::{cycle_reconstruct, CycleFactors, DenseMatrix, Entry, SparseTensor3};
use rand::Rng;
use rand_distr::StandardNormal;

/// Random sparse tensor with exactly `nnz` distinct nonzero coordinates.
pub fn random_sparse(n: usize, nnz: usize, seed: u64) -> SparseTensor3 {
    let mut rng = stream_rng(seed, STREAM_MISC);
    let coords = rand::seq::index::sample(&mut rng, n * n * n, nnz);
    let entries: Vec<Entry> = coords
        .iter()
        .map(|lin| Entry {
            i: lin / (n * n),
            j: (lin / n) % n,
            l: lin % n,
            value: rng.sample(StandardNormal),
        })
        .collect();
    SparseTensor3::new(n, entries).expect("valid entries")
}

/// Planted cycle-rank-k tensor (dense as COO) with known factors.
pub fn planted_cycle(n: usize, k: usize, seed: u64) -> SparseTensor3 {
    let mut rng = stream_rng(seed, STREAM_MISC);
    let mut rand_matrix = |rows: usize, cols: usize| {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    };
    let f = CycleFactors::new(
        n,
        k,
        rand_matrix(n, k * k),
        rand_matrix(n, k * k),
        rand_matrix(n, k * k),
    )
    .expect("consistent dims");
    SparseTensor3::from_dense(&cycle_reconstruct(&f)).expect("cubic dense")
}
