//! Data-parallel map with a sequential fallback.
//!
//! Every parallel stage in the crate goes through [`map`], which preserves
//! input order. Reductions stay sequential so floating-point sums do not
//! depend on the thread count.

use serde::{Deserialize, Serialize};

/// Worker count for data-parallel stages. `0` means "all cores", `1` runs
/// sequentially. Without the `parallel` feature everything is sequential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
#[derive(Default)]
pub struct Parallelism(pub usize);


impl Parallelism {
    pub const SEQUENTIAL: Parallelism = Parallelism(1);

    pub fn is_sequential(self) -> bool {
        self.0 == 1 || !cfg!(feature = "parallel")
    }
}

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], par: Parallelism, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;

    if par.is_sequential() || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    if par.0 == 0 {
        return items.par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(par.0).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(err) => {
            log::warn!("thread pool unavailable ({err}); running sequentially");
            items.iter().map(f).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], _par: Parallelism, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}
