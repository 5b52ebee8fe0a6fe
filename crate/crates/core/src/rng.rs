//! Seed derivation. Every consumer of randomness gets its own ChaCha stream
//! derived from the run seed, so adding draws in one place never shifts
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named randomness consumers within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    TrainData = 1,
    TestData = 2,
    Corruption = 3,
    Init = 4,
    Shuffle = 5,
    Augment = 6,
    Centers = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(seed) ^ (stream as u64).wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn stream_rng(seed: u64, stream: Stream) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
