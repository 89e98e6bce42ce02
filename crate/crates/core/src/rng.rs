//! Deterministic named RNG streams.
//!
//! Every run owns independent "batch" and "noise" streams, each keyed by
//! (master seed, stream name, iteration). SVI and SVI+ runs with the
//! same master seed therefore see identical batch sequences, and a run
//! is reproducible regardless of thread count or replay order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; the standard constants.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn absorb(state: u64, word: u64) -> u64 {
    mix(state ^ word)
}

/// Collapses (master seed, stream name, t) into a single u64.
pub fn derive_seed(master_seed: u64, stream: &str, t: u64) -> u64 {
    let mut s = absorb(0x6A09_E667_F3BC_C908, master_seed);
    for chunk in stream.as_bytes().chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        s = absorb(s, u64::from_le_bytes(word));
    }
    s = absorb(s, stream.len() as u64);
    absorb(s, t)
}

/// A seeded stream for (master seed, stream name, iteration).
pub fn stream_rng(master_seed: u64, stream: &str, t: u64) -> ChaCha8Rng {
    let mut s = derive_seed(master_seed, stream, t);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        s = mix(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
