//! Portable seeding.
//!
//! All randomness in the crate flows through [`ChaCha8Rng`] (the 8-round
//! ChaCha stream cipher used as a counter-based generator). Child seeds are
//! derived with the SplitMix64 finalizer so that any `(group, sample)` pair
//! can be regenerated in isolation, independent of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in manifests next to every seed.
pub const GENERATOR_NAME: &str = "chacha8 (rand_chacha 0.9) + splitmix64 seed derivation";

pub type Rng = ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `seed XOR hash(a, b)`.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    seed ^ splitmix64(splitmix64(a) ^ b.rotate_left(32))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
