//! Order-preserving map over trial indices.
//!
//! With the `parallel` feature the work runs on a rayon pool of the requested
//! size; without it everything runs on the calling thread. Results come back
//! in index order either way.

/// Maps `f` over `items`, keeping input order.
#[cfg(feature = "parallel")]
pub fn map_trials<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

/// Maps `f` over `items`, keeping input order.
#[cfg(not(feature = "parallel"))]
pub fn map_trials<T, R, F>(items: &[T], _workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Whether this build can run trials concurrently.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
