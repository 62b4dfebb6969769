//! Deterministic seed derivation, so that every random stream in a run is a
//! pure function of the master seed and its position (round, client, ...).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `base` with a path of stream labels into a new seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}

/// Stream labels, kept distinct so unrelated draws never share a seed.
pub(crate) mod stream {
    pub const MODEL_INIT: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const SELECTION: u64 = 3;
    pub const SHUFFLE: u64 = 4;
}
