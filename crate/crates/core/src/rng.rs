//! Index-derived random streams.
//!
//! Every random draw in a run descends from one master seed through a path
//! of integers (replicate index, purpose tag, permutation index...). Work
//! items therefore produce the same numbers whatever order or thread they
//! run on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub const TAG_SAMPLE: u64 = 0x5341_4d50;
pub const TAG_CALIBRATE: u64 = 0x4341_4c49;
pub const TAG_NULL: u64 = 0x4e55_4c4c;
pub const TAG_SYNTH: u64 = 0x5359_4e54;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed reached from `master` by following `path`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn stream(master: u64, path: &[u64]) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
