//! Seeded, shard-parallel random streams.
//!
//! Draws are split into fixed-size shards; shard `s` uses ChaCha8 seeded by
//! the caller's seed on stream `s`. Shard boundaries do not depend on the
//! thread count and partial results are reduced in shard order, so every
//! Monte-Carlo estimate is bit-reproducible for a given seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const SHARD_SIZE: usize = 1 << 15;

pub fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// SplitMix64 finalizer; derives independent sub-seeds (per step, per cell).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `work(rng, count)` on every shard of `n` draws in parallel and
/// returns the per-shard results in shard order.
pub fn map_shards<T, W>(n: usize, seed: u64, work: W) -> Vec<T>
where
    T: Send,
    W: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let n_shards = n.div_ceil(SHARD_SIZE);
    (0..n_shards)
        .into_par_iter()
        .map(|s| {
            let count = SHARD_SIZE.min(n - s * SHARD_SIZE);
            let mut rng = shard_rng(seed, s as u64);
            work(&mut rng, count)
        })
        .collect()
}
