//! Deterministic RNG stream derivation.
//!
//! Every random decision in the crate draws from a `ChaCha8Rng` seeded
//! through [`derive_seed`], so runs are reproducible from a single master
//! seed regardless of thread scheduling: each (purpose, index...) path gets
//! its own independent stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a stream path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(master ^ GOLDEN);
    for &word in path {
        state = splitmix64(state ^ word.wrapping_mul(GOLDEN));
    }
    state
}

/// A deterministic RNG for the stream identified by `path` under `master`.
pub fn stream_rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
