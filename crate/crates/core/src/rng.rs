//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit generator. Routines that fan out
//! into independent replications (restarts, Monte Carlo cells, loop iterations)
//! derive child streams from a parent seed and an index, so results never depend
//! on evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator seeded from a 64-bit value.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for child stream `index` under `parent` and a purpose `tag`.
pub fn derive_seed(parent: u64, tag: u64, index: u64) -> u64 {
    mix(mix(parent ^ mix(tag.wrapping_add(0x9e37_79b9_7f4a_7c15))).wrapping_add(index))
}

/// Child generator for `index` under `parent` and `tag`.
pub fn substream(parent: u64, tag: u64, index: u64) -> Rng {
    seeded(derive_seed(parent, tag, index))
}

/// Draws a fresh 64-bit seed from `rng`, used to hand a routine its own root.
pub fn next_seed(rng: &mut impl RngCore) -> u64 {
    rng.next_u64()
}
