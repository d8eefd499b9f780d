//! Counter-based keyed randomness.
//!
//! Every random quantity is addressed by `(master_seed, key, stream_tag,
//! index)`. A 64-bit mixing function turns the address into a ChaCha stream
//! id, so values never depend on evaluation order or on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream tags for the quantities drawn from the keyed generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Uniform site mark `V_x`.
    SiteUniform = 1,
    /// Exponential crossroad range marks, indexed by rank.
    CrossroadRange = 2,
    /// Poisson users on a street.
    StreetUsers = 3,
    /// Per-edge uniform of the Bernoulli-edge representation.
    EdgeUniform = 4,
    /// Point process sampling.
    Points = 5,
    /// Replicate seed derivation.
    Replicate = 6,
    /// One-dimensional coverage batches.
    Coverage = 7,
    /// Fuzz case generation.
    Fuzz = 8,
}

/// Finalizer of SplitMix64.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a sequence of words into one 64-bit digest.
pub fn hash_words(words: &[u64]) -> u64 {
    let mut h = 0x243F_6A88_85A3_08D3u64;
    for &w in words {
        h = mix64(h ^ mix64(w));
    }
    h
}

/// Derives a child seed, used for replicate and batch sharding.
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    hash_words(&[master, stream as u64, index])
}

/// A ChaCha generator positioned at the stream addressed by the key.
pub fn keyed_rng(master: u64, key: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(hash_words(&[key, stream as u64]));
    rng
}

/// A single uniform on `[0, 1)` addressed by `(master, key, stream, index)`.
pub fn keyed_uniform(master: u64, key: u64, stream: Stream, index: u64) -> f64 {
    let bits = hash_words(&[master, key, stream as u64, index]);
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A standard exponential addressed by `(master, key, stream, index)`.
pub fn keyed_exp1(master: u64, key: u64, stream: Stream, index: u64) -> f64 {
    let u = keyed_uniform(master, key, stream, index);
    -(-u).ln_1p()
}

/// A generator for a replicate or batch.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws a uniform in `[0, 1)` from any generator.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
