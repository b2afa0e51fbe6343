//! Counter-based seed derivation.
//!
//! Every random stream in the crate is keyed by a path of integers hashed
//! together with the master seed, so that circuits, shots and word
//! trajectories can be generated in any order (or in parallel) and still be
//! bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used for every simulation stream. ChaCha output is stable across
/// platforms and crate versions, unlike `StdRng`.
pub type SimRng = ChaCha8Rng;

/// Stream tags, the first element of a derivation path.
pub mod stream {
    pub const CIRCUIT: u64 = 0x0c1c;
    pub const SHOT: u64 = 0x5407;
    pub const WORDS: u64 = 0x3025;
    pub const TASK: u64 = 0x7a5c;
    pub const BOOTSTRAP: u64 = 0xb007;
    pub const PROBE: u64 = 0x9b0e;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = mix64(master.wrapping_add(GOLDEN));
    for (depth, &k) in path.iter().enumerate() {
        let salt = GOLDEN.wrapping_mul(depth as u64 + 2);
        h = mix64(h ^ mix64(k.wrapping_add(salt)));
    }
    h
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn rng_for(master: u64, path: &[u64]) -> SimRng {
    rng_from_seed(derive_seed(master, path))
}
