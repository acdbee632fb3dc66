//! Named random streams derived from a single master seed.
//!
//! Each consumer (tree generation, layout, parameter init, batching, ...)
//! draws from its own stream so that changing how much randomness one stage
//! uses never shifts another stage's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TREE: &str = "tree";
pub const LAYOUT: &str = "layout";
pub const INIT: &str = "init";
pub const BATCH: &str = "batch";
pub const SPLIT: &str = "split";
pub const MEMORIZE: &str = "memorize";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of the stream `name` under `master`.
pub fn stream_seed(master: u64, name: &str) -> u64 {
    splitmix64(splitmix64(master) ^ fnv1a(name))
}

pub fn stream_rng(master: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, name))
}
