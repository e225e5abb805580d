//! Indexed map execution: data-parallel under the `parallel` feature,
//! sequential otherwise.
//!
//! Campaign entry points in this crate all have the same shape — `n`
//! independent work items addressed by index, each seeded from its index —
//! so parallelism is confined to this one primitive. Results are collected
//! in index order, which makes the parallel and sequential schedules produce
//! identical output for pure `f`.

/// Map `f` over `0..n`, collecting results in index order.
///
/// Runs on the rayon pool when the `parallel` feature is enabled, otherwise
/// sequentially. `f` must be pure (or at least indexed-seeded) for the two
/// schedules to agree.
#[cfg(feature = "parallel")]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, collecting results in index order (sequential build).
#[cfg(not(feature = "parallel"))]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    indexed_map_seq(n, f)
}

/// Sequential reference schedule for [`indexed_map`]. Always available so
/// benchmarks can compare the two schedules within one build.
pub fn indexed_map_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Cap the size of the global worker pool. Call at most once, before any
/// parallel work runs; later calls report an error string from the pool
/// builder. A no-op (always `Ok`) in sequential builds.
#[cfg(feature = "parallel")]
pub fn configure_workers(n: usize) -> std::result::Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Sequential builds have no worker pool; the request is accepted and ignored.
#[cfg(not(feature = "parallel"))]
pub fn configure_workers(_n: usize) -> std::result::Result<(), String> {
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_schedules_preserve_index_order() {
        let par = indexed_map(100, |i| i * i);
        let seq = indexed_map_seq(100, |i| i * i);
        assert_eq!(par, seq);
        assert_eq!(par[7], 49);
    }

    #[test]
    fn empty_map_is_empty() {
        let out: Vec<u64> = indexed_map(0, |i| i as u64);
        assert!(out.is_empty());
    }
}
