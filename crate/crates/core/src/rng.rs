//! Seed derivation.
//!
//! Every unit of random work (one repetition for one data point, one scene, one
//! trainer) gets its own generator whose seed is a hash of the run seed and the
//! unit's coordinates. Work can then be scheduled in any order, on any number
//! of threads, without changing a single drawn number.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` with a path of stream coordinates into a new seed.
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &s in stream {
        h = splitmix64(h ^ splitmix64(s.wrapping_add(GOLDEN)));
    }
    h
}

/// Stable 64-bit hash of a string (FNV-1a), used to key per-scene streams by id.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A generator for the stream `stream` under run seed `seed`.
pub fn stream_rng(seed: u64, stream: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stream))
}
