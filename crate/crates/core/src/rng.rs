//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`Stream`] derived from the run
//! seed and a path of integers naming its purpose (phase tag, iteration,
//! proposal index, ...). Streams for different paths are independent, so
//! parallel work can be scheduled in any order without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Purpose tags used as the first element of a stream path.
pub mod tag {
    pub const INIT_EVAL: u64 = 1;
    pub const THOMPSON: u64 = 2;
    pub const BATCH_EVAL: u64 = 3;
    pub const POSTERIOR_SUMMARY: u64 = 4;
    pub const MC_DRAW: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream for `path` under `seed`.
pub fn stream(seed: u64, path: &[u64]) -> Stream {
    let mut h = splitmix64(seed);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(h)
}
