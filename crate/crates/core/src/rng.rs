//! Seeded random streams.
//!
//! Every trajectory owns a `ChaCha8Rng` seeded through `seed_from_u64`. The
//! stream for replicate `i` of an ensemble is seeded with
//! `base ^ mix64(i * 0x9E37_79B9_7F4A_7C15)`, where `mix64` is the MurmurHash3
//! 64-bit finalizer. `mix64(0) == 0`, so replicate 0 reuses the base seed and
//! a single-replicate ensemble reproduces a plain run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// MurmurHash3 `fmix64` finalizer (a bijection on `u64`).
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 33;
    z = z.wrapping_mul(0xff51_afd7_ed55_8ccd);
    z ^= z >> 33;
    z = z.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    z ^= z >> 33;
    z
}

pub fn replicate_seed(base: u64, index: usize) -> u64 {
    base ^ mix64((index as u64).wrapping_mul(GOLDEN))
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}
