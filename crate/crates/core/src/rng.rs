//! Counter-based random stream derivation.
//!
//! Every unit of stochastic work (a scenario, a rollout sample, an executed
//! repair) gets its own generator seeded from a hash of the master seed and a
//! tuple of integer coordinates. Results therefore never depend on how the
//! work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for all simulation streams.
pub type StreamRng = ChaCha8Rng;

/// Tags separating the stream families derived from one master seed.
pub mod tag {
    pub const SCENARIO: u64 = 0x5343_454e;
    pub const PLANNER: u64 = 0x504c_414e;
    pub const EXECUTE: u64 = 0x4558_4543;
    pub const CANDIDATES: u64 = 0x4341_4e44;
    pub const BASE: u64 = 0x4241_5345;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `seed` together with an ordered list of coordinates.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

/// Generator for the stream at `coords` under `seed`.
pub fn stream(seed: u64, coords: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, coords))
}
