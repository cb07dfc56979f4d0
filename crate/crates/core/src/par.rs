//! Data-parallel map with a sequential fallback.
//!
//! Results are always returned in index order, so any reduction performed
//! afterwards is independent of scheduling.

use serde::{Deserialize, Serialize};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "OPINET_THREADS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` only when the crate was built with the `parallel` feature.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

/// Evaluates `f(0..count)` and collects the results in index order.
pub fn map_indexed<T, F>(count: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec.effective() {
        Execution::Sequential => (0..count).map(f).collect(),
        Execution::Parallel => parallel_map(count, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// Sizes the global worker pool from [`THREADS_ENV`] if it is set.
///
/// Returns the configured count; a second call, or a pool that is already
/// running, leaves the existing pool in place.
pub fn init_threads_from_env() -> Option<usize> {
    let threads = std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok()?;
    if threads == 0 {
        return None;
    }
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Some(threads)
}
