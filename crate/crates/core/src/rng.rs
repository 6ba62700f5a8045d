//! Deterministic random streams.
//!
//! Every run derives all randomness from one 64-bit seed. Independent
//! sub-streams (per repetition, per purpose) use ChaCha stream ids, so results
//! do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sub-stream `id` of `seed`.
pub fn substream(seed: u64, id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Stream ids reserved for distinct consumers within one run.
pub mod purpose {
    pub const INIT: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const DATABASE: u64 = 3;
    pub const REPETITIONS: u64 = 1 << 32;
}
