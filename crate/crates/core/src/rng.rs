//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from the
//! scenario seed, so that adding or removing a consumer never shifts the
//! draws seen by another one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    World = 1,
    Sensing = 2,
    Spawn = 3,
    SpaEkf = 4,
    Validation = 5,
}

/// Independent stream for `(seed, purpose, run, member)`.
pub fn stream(seed: u64, purpose: Purpose, run: u32, member: u32) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) ^ ((run as u64) << 24) ^ member as u64);
    rng
}
