//! Per-episode random substreams.
//!
//! Episode `i` of an ensemble seeded with `master_seed` always reads from
//! ChaCha8 stream `i` of key `master_seed`, starting at word 0. How episodes
//! are split across workers therefore cannot change any drawn value.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone)]
pub struct SubstreamFactory {
    base: ChaCha8Rng,
}

impl SubstreamFactory {
    pub fn new(master_seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(master_seed),
        }
    }

    /// Fresh generator positioned at the start of the episode's stream.
    pub fn episode(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng.set_word_pos(0);
        rng
    }
}

/// Shorthand for `SubstreamFactory::new(master_seed).episode(index)`.
pub fn episode_stream(master_seed: u64, index: u64) -> ChaCha8Rng {
    SubstreamFactory::new(master_seed).episode(index)
}
