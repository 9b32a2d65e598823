//! Opt-in data parallelism for the elementwise and per-row kernels.
//!
//! Reductions never go through here: every sum is taken sequentially in node
//! order, so enabling threads leaves results bitwise unchanged.

use std::sync::atomic::{AtomicUsize, Ordering};

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Sets the number of worker threads used by row kernels.
///
/// A value above 1 builds the global rayon pool on first use; later calls can
/// only lower the effective count.
pub fn set_threads(n: usize) {
    let n = n.max(1);
    if n > 1 {
        // Fails if the global pool already exists; the existing pool is reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    THREADS.store(n, Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

/// Reads `PCFLOW_THREADS`; absent or unparsable means sequential.
pub fn threads_from_env() -> usize {
    std::env::var("PCFLOW_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Applies `f` to consecutive chunks of length `chunk`.
pub(crate) fn for_each_chunk<T: Send>(data: &mut [T], chunk: usize, f: impl Fn(&mut [T]) + Sync + Send) {
    if threads() > 1 {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk).for_each(f);
    } else {
        data.chunks_mut(chunk).for_each(f);
    }
}
