//! Ordered map over an index range, serial or on the rayon pool.

/// Returns `[f(0), f(1), ..., f(n - 1)]`. With the `parallel` feature and `parallel == true` the
/// calls run on the rayon pool; the output order never changes.
pub(crate) fn map_indices<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallel;
    (0..n).map(f).collect()
}
