//! Seeded, splittable randomness.
//!
//! Every random choice in the crate flows from a `(seed, stream)` pair, so a
//! trial index maps to an independent ChaCha stream and results do not depend
//! on how trials are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed, used when a routine needs a seed rather than a generator.
pub fn child_seed(seed: u64, salt: u64) -> u64 {
    use rand::RngCore;
    stream(seed, salt.wrapping_add(0x9e37_79b9_7f4a_7c15)).next_u64()
}

/// Seed for trial `t` of a run seeded with `seed` (splitmix64 finaliser).
pub fn trial_seed(seed: u64, t: u64) -> u64 {
    let mut z = seed ^ t.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
