//! Seedable, portable random number streams.
//!
//! Every randomized routine in this crate takes a `u64` seed and derives
//! independent ChaCha streams from it. Stream splitting is by index, not by
//! execution order, so concurrent runs (restarts, repetitions, scan
//! candidates) produce bit-identical results regardless of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha12Rng;

/// Root generator for a seed (stream 0).
pub fn rng(seed: u64) -> Rng {
    stream_rng(seed, 0)
}

/// Independent generator for the given `(seed, stream)` pair.
///
/// Streams with distinct indices never overlap; use one stream per restart,
/// repetition, or candidate.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha12Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
