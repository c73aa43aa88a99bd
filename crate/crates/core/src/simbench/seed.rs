//! Deterministic stream seeding.
//!
//! Every random draw in a study comes from a ChaCha stream keyed by
//! `(master_seed, rep_index, stream_tag)` and, where a stream is split per
//! column, a column index. Keys are combined with the splitmix64 finalizer so
//! nearby inputs map to unrelated seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags; one per independent source of randomness in a replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Design = 1,
    Noise = 2,
    TestDesign = 3,
    TestNoise = 4,
    Screen = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of keys into one 64-bit seed.
pub fn hash_keys(keys: &[u64]) -> u64 {
    keys.iter().fold(0x6A09_E667_F3BC_C908, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn stream_seed(master_seed: u64, rep_index: u64, stream: Stream) -> u64 {
    hash_keys(&[master_seed, rep_index, stream as u64])
}

pub fn stream_rng(master_seed: u64, rep_index: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master_seed, rep_index, stream))
}

/// Stream for one column of a column-split stream.
pub fn column_rng(master_seed: u64, rep_index: u64, stream: Stream, column: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash_keys(&[master_seed, rep_index, stream as u64, column as u64]))
}
