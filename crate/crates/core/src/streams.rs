//! Seed derivation. Every consumer of randomness draws from its own ChaCha20
//! stream keyed by `(master seed, label)`, so adding draws to one consumer
//! never shifts another.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Stream labels used by the simulators and the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Initial = 1,
    ZNoise = 2,
    WNoise = 3,
    Regime = 4,
    OutcomeNoise = 5,
    EstimatorStart = 16,
    Replication = 32,
    Oracle = 64,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha20Rng {
    rng_for_label(seed, stream as u64)
}

pub fn rng_for_label(seed: u64, label: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

/// Seed of the `index`-th child of `seed` within `stream`. Children are read
/// at fixed word offsets, so child `i` does not depend on how many siblings exist.
pub fn child_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let mut rng = rng_for(seed, stream);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}
