//! Reproducible random number streams.
//!
//! Every replicate of an experiment draws from its own ChaCha8 stream, derived
//! from the master seed and the replicate's coordinates. Streams are
//! independent of thread scheduling, so results are byte-identical no matter
//! how work is distributed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for replicate `replicate` of grid cell `cell` under `master_seed`.
///
/// The stream id packs the cell index into the high 32 bits, so cells and
/// replicates never collide as long as both stay below 2^32.
pub fn replicate_rng(master_seed: u64, cell: u32, replicate: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((cell as u64) << 32) | replicate as u64);
    rng
}

/// Single-stream RNG for standalone simulations.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
