//! Seed discipline. Every stochastic step owns an RNG derived from the run
//! seed and a tag path, so no RNG state is ever shared between steps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of tags into an independent child seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}

/// Counter-style stream: same key, different stream per `counter`.
pub fn stream_rng(seed: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(counter);
    rng
}

// Stable tags for the pipeline stages.
pub const TAG_INIT: u64 = 1;
pub const TAG_SHUFFLE: u64 = 2;
pub const TAG_UNDERSAMPLE: u64 = 3;
pub const TAG_FOLDS: u64 = 4;
pub const TAG_BALANCE: u64 = 5;
pub const TAG_INNER_SPLIT: u64 = 6;
pub const TAG_EVAL: u64 = 7;
pub const TAG_SYNTH: u64 = 8;
