//! Keyed random streams.
//!
//! Every random draw in the simulator comes from a ChaCha8 stream whose key
//! and stream id are derived from the logical coordinates of the thing being
//! sampled, never from a shared generator. Results therefore do not depend on
//! evaluation order or on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of words into one 64-bit key. Order matters.
pub fn fold_key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3u64, |acc, &p| mix64(acc ^ mix64(p)))
}

/// A ChaCha8 stream keyed by `(seed, domain)` and positioned on stream `id`.
pub fn keyed_stream(seed: u64, domain: u64, id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&mix64(seed ^ domain.rotate_left(17)).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(id);
    rng
}

/// Plain seeded generator for sequential consumers (training, datasets).
pub fn seeded(seed: u64, domain: u64) -> ChaCha8Rng {
    keyed_stream(seed, domain, 0)
}
