//! Seeded random streams.
//!
//! All randomness in the pipeline flows from one user-facing seed,
//! fanned out into labeled substreams so that adding a consumer does
//! not perturb the draws of another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// FNV-1a, used only to hash substream labels.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Deterministic stream for (seed, label).
pub fn substream(seed: u64, label: &str) -> ChaCha12Rng {
    let mixed = seed.wrapping_mul(0x9e3779b97f4a7c15) ^ fnv1a(label.as_bytes());
    ChaCha12Rng::seed_from_u64(mixed)
}
