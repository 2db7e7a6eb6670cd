//! Data-parallel execution facade.
//!
//! With the `parallel` feature (default) the indexed maps run on rayon;
//! without it they fall back to plain sequential loops. Both paths produce
//! identical results: work items are independent, outputs are collected in
//! index order, and reductions fold shard results in shard order. The
//! `ExecMode` variants exist so benchmarks can compare the two paths inside
//! a single build.

use std::sync::OnceLock;

/// Worker-count cap, read once from `W3KIT_NUM_THREADS`.
pub fn thread_cap() -> Option<usize> {
    static CAP: OnceLock<Option<usize>> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("W3KIT_NUM_THREADS")
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
    })
}

#[cfg(feature = "parallel")]
fn init_pool() {
    static INIT: OnceLock<()> = OnceLock::new();
    INIT.get_or_init(|| {
        if let Some(n) = thread_cap() {
            // Ignore the error if a global pool already exists.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}

/// How to run a data-parallel region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// Rayon when the `parallel` feature is enabled, sequential otherwise.
    Parallel,
    Sequential,
}

impl Default for ExecMode {
    fn default() -> Self {
        ExecMode::Parallel
    }
}

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_indexed<R: Send>(mode: ExecMode, n: usize, f: impl Fn(usize) -> R + Send + Sync) -> Vec<R> {
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        ExecMode::Parallel => map_indexed_par(n, f),
    }
}

#[cfg(feature = "parallel")]
fn map_indexed_par<R: Send>(n: usize, f: impl Fn(usize) -> R + Send + Sync) -> Vec<R> {
    use rayon::prelude::*;
    init_pool();
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed_par<R: Send>(n: usize, f: impl Fn(usize) -> R + Send + Sync) -> Vec<R> {
    (0..n).map(f).collect()
}
