//! Deterministic random streams.
//!
//! Every consumer of randomness (a tree, an agent, a split) gets its own
//! ChaCha stream derived from a base seed and a tuple of indices, so results
//! do not depend on the order in which parallel jobs run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for `(seed, keys...)`.
pub fn stream(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for &k in keys {
        h = splitmix(h ^ splitmix(k.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
