//! Worker pool sized by `SPARSE_WEIGHTS_THREADS`, defaulting to all cores.

pub const THREADS_ENV: &str = "SPARSE_WEIGHTS_THREADS";

pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` inside a dedicated rayon pool. Results never depend on the
/// thread count: callers collect per-item results in index order.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
    {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
