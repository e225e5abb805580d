//! Deterministic seed derivation.
//!
//! Every stochastic component of the crate (episode generation, exploration,
//! minibatch sampling, Monte Carlo trials) owns a ChaCha stream seeded through
//! this module, so that one base seed fans out into statistically independent,
//! reproducible substreams. Derivation uses the SplitMix64 finalizer, whose
//! output is a bijection of its input — distinct `(base, tag, index)` triples
//! therefore cannot collide trivially.

/// SplitMix64 finalization step: a fixed avalanche permutation of `u64`.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent stream seed from a base seed and a stream tag.
///
/// Tags distinguish the *role* of a stream (exploration vs. minibatch
/// sampling vs. scene generation) under the same user-facing seed.
pub fn derive(base: u64, tag: u64) -> u64 {
    splitmix64(base ^ splitmix64(tag))
}

/// Derive a per-item seed from a base seed, a stream tag, and an item index
/// (episode number, trial number, sweep cell, ...).
pub fn derive_indexed(base: u64, tag: u64, index: u64) -> u64 {
    splitmix64(derive(base, tag) ^ splitmix64(index.wrapping_add(0x51ed_270b)))
}

// Stream tags. Values are arbitrary but frozen: changing them changes every
// derived stream and therefore every logged artifact.
/// Exploration (epsilon-greedy coin flips and random actions).
pub const TAG_EXPLORE: u64 = 1;
/// Replay minibatch index draws.
pub const TAG_SAMPLE: u64 = 2;
/// Episode scene generation during training.
pub const TAG_EPISODE: u64 = 3;
/// Episode scene generation during evaluation.
pub const TAG_EVAL: u64 = 4;
/// Monte Carlo operator trials (contraction / nonexpansiveness campaigns).
pub const TAG_TRIAL: u64 = 5;
/// Network parameter initialization.
pub const TAG_INIT: u64 = 6;
/// Uniform-random evaluation policy draws.
pub const TAG_POLICY: u64 = 7;
/// Nonexpansiveness probe pairs.
pub const TAG_PROBE: u64 = 8;
/// Fixed-point iteration trials.
pub const TAG_FIXED_POINT: u64 = 9;
/// Density-convergence demonstration resamples.
pub const TAG_DEMO: u64 = 10;
