//! Seed fan-out.
//!
//! Every stage of the pipeline gets its own stream derived from one master
//! seed: `derive(master, k) = splitmix64(master + (k + 1) * 0x9E3779B97F4A7C15)`.
//! Stage counters are the `STAGE_*` constants below; nested fan-out (one
//! seed per template, per source) applies `derive` again.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STAGE_GENERATE: u64 = 0;
pub const STAGE_SPLIT: u64 = 1;
pub const STAGE_CRF: u64 = 2;
pub const STAGE_BLSTM: u64 = 3;
pub const STAGE_GREEDY: u64 = 4;
pub const STAGE_SVM: u64 = 5;
pub const STAGE_EMBEDDINGS: u64 = 6;
pub const STAGE_INDIVIDUAL_CRF: u64 = 7;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, counter: u64) -> u64 {
    splitmix64(master.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
