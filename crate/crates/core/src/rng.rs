//! Reproducible randomness.
//!
//! A single master seed deterministically derives independent per-task
//! streams, so Monte-Carlo results are identical under any parallel
//! schedule: shard `n` always draws from `stream_rng(seed, n)`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// RNG for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
