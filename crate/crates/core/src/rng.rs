//! Seed splitting for reproducible, worker-count independent streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by
//! `split_seed(master, &[control_index, path_index, purpose])`. Paths never
//! share a generator, so any partition of paths across threads produces the
//! same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tag for the Brownian increments of a path.
pub const PURPOSE_NOISE: u64 = 0;
/// Stream tag for randomized controls; independent of the increments.
pub const PURPOSE_CONTROL: u64 = 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of stream indices.
pub fn split_seed(master: u64, stream: &[u64]) -> u64 {
    stream.iter().fold(splitmix64(master), |acc, &s| {
        splitmix64(acc ^ splitmix64(s))
    })
}

/// Generator for one `(seed, path, purpose)` triple.
pub fn path_rng(seed: u64, path_index: u64, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(seed, &[path_index, purpose]))
}
