//! Order-preserving map over independent documents.
//!
//! With the `parallel` feature the work runs on rayon; without it, or with
//! `jobs == 1`, it runs sequentially. Results always follow input order, so
//! output never depends on scheduling.

/// Whether this build can run documents in parallel.
pub const PARALLEL: bool = cfg!(feature = "parallel");

/// Maps `f` over `items` on the calling thread.
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Maps `f` over `items` using up to `jobs` threads (`0` = all cores).
#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;

    if jobs == 1 || items.len() < 2 {
        return map_sequential(items, f);
    }
    if jobs == 0 {
        return items.par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => map_sequential(items, f),
    }
}

/// Maps `f` over `items`; `jobs` is ignored in sequential builds.
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(items: &[T], _jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_sequential(items, f)
}
