use rayon::prelude::*;

pub const THREADS_ENV: &str = "RFR_THREADS";

/// Sizes the global worker pool from `RFR_THREADS` (default 1). Only the
/// first call has an effect.
pub fn configure_from_env() -> usize {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1);
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    rayon::current_num_threads()
}

/// Maps in parallel but returns results in input order, so any reduction
/// the caller performs afterwards has a fixed order.
pub fn map_ordered<T: Sync, R: Send>(items: &[T], f: impl Fn(usize, &T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()
}
