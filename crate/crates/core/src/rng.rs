//! Deterministic random streams derived from a single run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Epoch = 2,
    NodeFlow = 3,
    Dropout = 4,
    Probe = 5,
}

/// Independent stream for `(purpose, epoch, batch)`; identical inputs give identical streams.
pub fn stream(seed: u64, purpose: Purpose, epoch: u64, batch: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (purpose as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream((epoch << 32) ^ batch);
    rng
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
