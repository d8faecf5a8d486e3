//! Deterministic seed derivation and random streams.
//!
//! Every random quantity in the harness is drawn from a ChaCha stream whose
//! seed is derived from a master seed plus a list of integer tags. Streams
//! are never shared: the environment, each policy, and each Monte-Carlo
//! evaluator derive their own. This is what makes results independent of
//! thread scheduling and of which policies are in the run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Keeping them in one place avoids accidental collisions.
pub mod tag {
    pub const ENV_INIT: u64 = 0x01;
    pub const ENV_WARMUP: u64 = 0x02;
    pub const ENV_PROCESS: u64 = 0x03;
    pub const ENV_MEASURE: u64 = 0x04;
    pub const SPEC_GEN: u64 = 0x05;
    pub const POLICY: u64 = 0x06;
    pub const PERTURB: u64 = 0x07;
    pub const BOUND_MC: u64 = 0x08;
    pub const ENV_OF_RUN: u64 = 0x09;
    pub const RUN: u64 = 0x0a;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derives a child seed from `master` and an ordered list of tags.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t));
    }
    s
}

/// A seeded random stream.
pub type Stream = ChaCha8Rng;

/// Creates a stream from a derived seed.
pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for a (seed, tag, counter...) triple. Used for counter-based
/// per-round noise so different policies on the same episode see the same
/// environment realization.
pub fn counter_stream(seed: u64, tags: &[u64]) -> Stream {
    stream(derive_seed(seed, tags))
}
