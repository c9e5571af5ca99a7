//! Seed derivation for sampled runs.
//!
//! All sampling uses ChaCha8. A run with seed `s` draws from stream 0 of the
//! generator keyed by `s`; restart attempt `k` of that run draws from stream
//! `k`. Shot `i` of a batch with base seed `s` uses the seed
//! `derive_seed(s, i)`, so each shot's randomness depends only on
//! `(s, i)` and never on execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix(seed ^ mix(index))
}
