//! Counter-based per-trial randomness and deterministic parallel batches.
//!
//! Trial `i` of a run seeded with `seed` always draws from the ChaCha8
//! stream `(seed, i)`, so results do not depend on how trials are spread
//! over worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Trials generated per parallel chunk when streaming results.
pub const CHUNK: u64 = 1 << 16;

/// Generator for a single trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `f(trial_id)` for `first..first + count` on `workers` threads and
/// returns the results in trial order.
pub fn par_trials<T, F>(first: u64, count: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = pool(workers)?;
    Ok(pool.install(|| (first..first + count).into_par_iter().map(&f).collect()))
}

/// Streams results chunk by chunk in trial order, calling `sink` on each
/// chunk. Memory stays bounded by [`CHUNK`] results.
pub fn par_trials_chunked<T, F, S>(
    first: u64,
    count: u64,
    workers: usize,
    f: F,
    mut sink: S,
) -> Result<()>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
    S: FnMut(Vec<T>) -> Result<()>,
{
    let pool = pool(workers)?;
    let end = first + count;
    let mut start = first;
    while start < end {
        let stop = (start + CHUNK).min(end);
        let chunk: Vec<T> = pool.install(|| (start..stop).into_par_iter().map(&f).collect());
        sink(chunk)?;
        start = stop;
    }
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::InvalidParameter("worker count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}
