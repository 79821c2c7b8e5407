//! Seeded random streams. Every run uses ChaCha8 seeded from a 64-bit
//! seed; independent replicas use distinct stream numbers of the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Seed used when none is given on the command line.
pub const DEFAULT_SEED: u64 = 20_150_901;

pub fn seeded(seed: u64) -> SimRng {
    replica(seed, 0)
}

/// Stream `index` of `seed`.
pub fn replica(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
