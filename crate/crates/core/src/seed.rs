//! Counter-based seed derivation.
//!
//! Every random stream in a simulation is keyed by a tuple of integers
//! (master seed, stream tag, realization, cell, slot, ...). The key is folded
//! through the SplitMix64 finalizer so any slot of any cell can be regenerated
//! without replaying earlier draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Distinct tags give disjoint seed streams for the same indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    UserChannel = 1,
    ForeignChannel = 2,
    Hop = 3,
    Noise = 4,
    Contamination = 5,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `master` and `path` into a single 64-bit seed.
pub fn derive_seed(master: u64, stream: Stream, path: &[u64]) -> u64 {
    let mut acc = mix(master.wrapping_add(GOLDEN));
    acc = mix(acc ^ (stream as u64).wrapping_mul(GOLDEN));
    for &p in path {
        acc = mix(acc.wrapping_add(GOLDEN) ^ p);
    }
    acc
}

pub fn stream_rng(master: u64, stream: Stream, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, path))
}
