//! Chunked reductions with a fixed reduction tree.
//!
//! Work is split into chunks of [`CHUNK`] items regardless of thread count.
//! Each chunk is folded sequentially and the chunk partials are combined in
//! index order, so the `parallel` feature changes wall time but never the
//! floating-point result.

/// Items per chunk. Part of the reproducibility contract: changing it changes
/// low-order bits of every reduction.
pub const CHUNK: usize = 256;

/// Map each chunk `[start, end)` of `0..len` to a partial result, then fold the
/// partials left to right.
pub fn chunked_reduce<T, M, R>(len: usize, map: M, mut reduce: R) -> Option<T>
where
    T: Send,
    M: Fn(usize, usize) -> T + Sync + Send,
    R: FnMut(T, T) -> T,
{
    let n_chunks = len.div_ceil(CHUNK);
    let partials = map_indices(n_chunks, |c| {
        let start = c * CHUNK;
        map(start, (start + CHUNK).min(len))
    });
    partials.into_iter().reduce(&mut reduce)
}

/// `(0..len).map(f).collect()`, in parallel when the feature is enabled.
/// Output order always follows the index.
pub fn map_indices<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Parallel map over a slice, order preserved.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
