//! Data-parallel execution helpers.
//!
//! Every hot loop in this crate is an independent map over indices whose
//! results are collected in index order, so output bytes do not depend on
//! the worker count. With the `parallel` feature (default) the maps run on
//! the rayon pool; without it they fall back to a plain sequential loop
//! with the same signature.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n` and collects results in index order.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indices_seq(n, f)
    }
}

/// Sequential variant, always available. Used by the fallback build and by
/// the benchmark suite as the single-threaded reference.
pub fn map_indices_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Configures the global thread pool size. Returns false if the pool was
/// already initialized (harmless; first call wins).
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) -> bool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_ok()
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) -> bool {
    false
}

/// Reads the default thread count from the `SPECPOL_THREADS` environment
/// variable, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("SPECPOL_THREADS").ok()?.parse::<usize>().ok().filter(|&n| n > 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_collection() {
        let v = map_indices(100, |i| i * i);
        let s = map_indices_seq(100, |i| i * i);
        assert_eq!(v, s);
    }
}
