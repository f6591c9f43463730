use rayon::ThreadPoolBuilder;

/// Runs `f` inside a dedicated pool of `threads` workers; with one thread it
/// runs on the caller.
pub(crate) fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    if threads <= 1 {
        return f();
    }
    match ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
