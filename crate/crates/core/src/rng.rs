//! The random source used by every sampling routine.
//!
//! All sampling is driven by ChaCha8 seeded from a single `u64` through
//! `SeedableRng::seed_from_u64`. Each categorical draw consumes one `f64`
//! uniform variate in `[0, 1)` (53 random bits). Output is reproducible for a
//! given seed within this implementation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}
