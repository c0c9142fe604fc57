//! Parallel/sequential execution facade.
//!
//! Batch routines express their inner loops through these helpers so the
//! `parallel` feature only changes how work is scheduled, never what is
//! computed. Reductions are deterministic: results are combined in index
//! order regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n` and collects the results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Folds `f(i)` for `i in 0..n` with `combine`, starting from `identity`.
/// The combination order is the index order, so floating-point reductions
/// do not depend on the thread count.
pub(crate) fn fold_indexed<T, F, C>(n: usize, identity: T, f: F, combine: C) -> T
where
    T: Send + Sync + Clone,
    F: Fn(usize) -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    // Chunked so the parallel path produces one partial per chunk and the
    // partials are merged left-to-right.
    let chunk = usize::max(1, n / 256);
    let starts: Vec<usize> = (0..n).step_by(chunk).collect();
    let partials = map_indexed(starts.len(), |ci| {
        let lo = starts[ci];
        let hi = usize::min(lo + chunk, n);
        let mut acc = identity.clone();
        for i in lo..hi {
            acc = combine(acc, f(i));
        }
        acc
    });
    partials.into_iter().fold(identity, combine)
}
