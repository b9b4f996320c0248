//! Seed splitting. Every random stream in a run is a ChaCha8 stream keyed by
//! the master seed and selected by a fixed stream id, so adding or removing a
//! consumer (for example a snapshot dump) never shifts another stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream that draws the initial i.i.d. field.
pub const STREAM_INITIAL_FIELD: u64 = 0;
/// Stream that drives the sampler sweeps.
pub const STREAM_CHAIN: u64 = 1;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Master seed of replica `index`, derived with the SplitMix64 finalizer.
pub fn replica_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
