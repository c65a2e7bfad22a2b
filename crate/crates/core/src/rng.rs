//! Seed derivation.
//!
//! Every random draw in the crate flows from a single 64-bit base seed. A
//! stream is selected by `(seed, stream_id)`: the base seed keys a ChaCha8
//! generator and the stream id selects one of its 2^64 independent streams,
//! so replicate `r` of an experiment is reproducible on its own and does not
//! depend on how many replicates ran before it or on which thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fallback seed when neither `--seed` nor `RDSGLS_SEED` is given.
pub const DEFAULT_SEED: u64 = 20_170_601;

/// Reserved stream ids. Replicates use ids `0..replicates`.
pub mod stream {
    pub const GRAPH: u64 = u64::MAX;
    pub const OUTCOMES: u64 = u64::MAX - 1;
    pub const THETA: u64 = u64::MAX - 2;
    pub const TREE: u64 = u64::MAX - 3;
}

pub type Rng = ChaCha8Rng;

pub fn derive(seed: u64, stream_id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
