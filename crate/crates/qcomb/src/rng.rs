//! Seeding helpers for reproducible ensembles.
//!
//! Every ensemble member gets its own ChaCha stream derived from
//! `(master_seed, sample_index)`, so parallel runs produce identical
//! results regardless of scheduling or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for ensemble member `index` under `master_seed`.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// RNG for a standalone (non-ensemble) computation.
pub fn seed_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 0)
}
