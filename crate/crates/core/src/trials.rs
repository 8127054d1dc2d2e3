//! Independent trials, optionally spread over a worker pool.
//!
//! Results are always returned in trial-index order, so any fold over them
//! is independent of the number of workers.

/// Evaluates `f(0..count)` on up to `workers` threads.
#[cfg(feature = "parallel")]
pub fn map_trials<T, F>(workers: usize, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_trials<T, F>(_workers: usize, count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Default worker count: available parallelism.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_workers() {
        let a = map_trials(1, 100, |i| i * i);
        let b = map_trials(8, 100, |i| i * i);
        assert_eq!(a, b);
    }
}
