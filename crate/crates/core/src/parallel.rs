//! Worker-pool sizing shared by rate sweeps and the simulator.

use crate::error::{Error, Result};

/// Worker count requested through `EXPLAB_THREADS`, if set and positive.
pub fn worker_threads() -> Option<usize> {
    std::env::var("EXPLAB_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

/// Runs `f` inside a pool bounded by `EXPLAB_THREADS`, or on the global pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match worker_threads() {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?
            .install(f)),
        None => Ok(f()),
    }
}
