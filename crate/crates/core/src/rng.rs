//! Seeded, splittable random streams.
//!
//! Every replication draws from its own ChaCha8 stream, addressed by a
//! `(seed, stream)` pair. ChaCha is counter based, so stream `r` of a seed
//! is the same sequence no matter how many threads run or in which order
//! replications are scheduled.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Offset added to stream ids of a second, statistically independent side of
/// a paired experiment (for example the monotone half of an identity test).
pub const SECOND_SIDE: u64 = 1 << 48;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
