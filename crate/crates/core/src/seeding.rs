//! Deterministic random streams.
//!
//! Every replicate of a Monte Carlo run draws from its own ChaCha stream,
//! keyed by the master seed and the replicate index, so results do not
//! depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn rng(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` under master seed `master`.
pub fn replicate_rng(master: u64, index: u64) -> StreamRng {
    let mut r = ChaCha8Rng::seed_from_u64(master);
    r.set_stream(index);
    r
}

/// Runs `task` once per replicate index in parallel, each with its own
/// stream, and returns the results in index order.
pub fn par_replicates<T, F>(master: u64, reps: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync,
{
    use rayon::prelude::*;
    (0..reps)
        .into_par_iter()
        .map(|i| task(i, &mut replicate_rng(master, i as u64)))
        .collect()
}
