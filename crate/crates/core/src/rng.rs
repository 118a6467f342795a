//! Seed handling.
//!
//! Every random object in the library is built from a single `u64` seed
//! through ChaCha8 streams, so a run is reproducible from its seed alone.
//! Stream numbers are fixed:
//!
//! * stream 0 — CountSketch bucket/sign draws
//! * stream 1 — Gaussian entry draws
//! * stream 2 — composed-transform CountSketch stage
//! * stream 3 — composed-transform Gaussian stage
//! * stream 4 — solver initializations
//! * stream 5 — miscellaneous (test vectors, noise)
//!
//! Pipelines derive one child seed per random object by drawing `u64`s
//! from a parent stream; see [`SeedSequence`].

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STREAM_COUNTSKETCH: u64 = 0;
pub const STREAM_GAUSSIAN: u64 = 1;
pub const STREAM_COMPOSED_CS: u64 = 2;
pub const STREAM_COMPOSED_GAUSS: u64 = 3;
pub const STREAM_SOLVER: u64 = 4;
pub const STREAM_MISC: u64 = 5;

/// ChaCha8 generator on a named stream of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deterministic sequence of child seeds drawn from one parent stream.
///
/// `SeedSequence::new(seed, restart)` is how the pipeline splits its master
/// seed: restart r reads stream `STREAM_MISC + 1 + r`, and the i-th call to
/// [`SeedSequence::next_seed`] yields the seed of the i-th random object of
/// that restart (S1, S2, S3, T1, T2, T3, solver).
pub struct SeedSequence {
    rng: ChaCha8Rng,
}

impl SeedSequence {
    pub fn new(seed: u64, branch: u64) -> Self {
        SeedSequence { rng: stream_rng(seed, STREAM_MISC + 1 + branch) }
    }

    pub fn next_seed(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
