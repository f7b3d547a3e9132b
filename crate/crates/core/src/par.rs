//! Order-preserving data-parallel helpers.
//!
//! With the `parallel` feature, [`Execution::Parallel`] runs on rayon; without
//! it, every call degrades to a sequential loop. Results are always returned in
//! index order, so both modes produce identical outputs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Whether this mode actually runs in parallel in the current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indexed<U, F>(exec: Execution, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Fan-out for blocking I/O (one backend request per branch). Owns a dedicated
/// thread pool sized to the request width so slow requests do not starve the
/// global CPU pool.
pub struct FanOut {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl FanOut {
    pub fn new(exec: Execution, width: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = if exec.is_parallel() && width > 1 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(width.min(512))
                    .thread_name(|i| format!("cpt-fanout-{i}"))
                    .build()
                    .ok()
            } else {
                None
            };
            FanOut { pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = (exec, width);
            FanOut {}
        }
    }

    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().map(f).collect());
        }
        items.iter().map(f).collect()
    }
}
