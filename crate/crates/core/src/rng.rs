//! Seed splitting. Every random stream is a ChaCha8 generator keyed by the
//! run seed and positioned on a stream derived from a purpose tag and an
//! index, so shards can be drawn in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, tag: u32, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tag as u64) << 40) ^ index);
    rng
}

pub mod tags {
    pub const CONES: u32 = 1;
    pub const DISCS: u32 = 2;
    pub const CHAOS_GAME: u32 = 3;
    pub const PHI: u32 = 4;
}
