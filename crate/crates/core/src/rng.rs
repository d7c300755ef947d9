//! Reproducible random streams.
//!
//! All Monte Carlo work draws from ChaCha8 (`rand_chacha`), a counter-based
//! generator with a platform-independent output stream. A job seeded with
//! `seed` is cut into fixed-size chunks; chunk `c` uses the ChaCha stream
//! number `c` of the key derived from `seed`. Chunk boundaries never depend on
//! the number of worker threads, so merged totals are identical for any
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Draws per chunk of parallel Monte Carlo work.
pub const CHUNK: usize = 4096;

/// Independent deterministic substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `(chunk index, first item, item count)` for `total` items.
pub fn chunks(total: usize) -> impl Iterator<Item = (u64, usize, usize)> + Clone {
    (0..total.div_ceil(CHUNK)).map(move |c| {
        let start = c * CHUNK;
        (c as u64, start, CHUNK.min(total - start))
    })
}

/// Mixes a grid index into a base seed (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
