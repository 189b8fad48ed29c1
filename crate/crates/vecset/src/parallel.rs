//! Deterministic data-parallel helpers.
//!
//! With the `parallel` feature the helpers dispatch to rayon once the
//! workload exceeds a grain size; below it (or without the feature) they run
//! sequentially. All helpers preserve input order, so results are
//! bit-identical across thread counts: parallel maps collect in index order
//! and reductions happen on the ordered output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default number of work items below which the sequential path is used.
/// Rayon's spawn/join overhead is on the order of a microsecond; items
/// cheaper than that should be batched.
pub const DEFAULT_GRAIN: usize = 64;

/// Ordered map over a slice.
pub fn map<T, U, F>(items: &[T], grain: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if items.len() >= grain.max(2) {
        return items.par_iter().map(f).collect();
    }
    let _ = grain;
    items.iter().map(f).collect()
}

/// Ordered map over an index range `0..n`.
pub fn map_range<U, F>(n: usize, grain: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if n >= grain.max(2) {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = grain;
    (0..n).map(f).collect()
}

/// Apply `f` to disjoint output chunks of `chunk_len` elements each.
/// `f` receives the chunk index and the mutable chunk.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, grain_chunks: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    debug_assert!(chunk_len > 0);
    #[cfg(feature = "parallel")]
    {
        let chunks = data.len().div_ceil(chunk_len);
        if chunks >= grain_chunks.max(2) {
            data.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
    }
    let _ = grain_chunks;
    for (i, c) in data.chunks_mut(chunk_len).enumerate() {
        f(i, c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let items: Vec<usize> = (0..1000).collect();
        let out = map(&items, 8, |&x| x * 2);
        assert_eq!(out, (0..1000).map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn chunked_writes_are_disjoint() {
        let mut data = vec![0usize; 103];
        for_each_chunk_mut(&mut data, 10, 2, |i, c| {
            for v in c.iter_mut() {
                *v = i;
            }
        });
        assert_eq!(data[0], 0);
        assert_eq!(data[99], 9);
        assert_eq!(data[102], 10);
    }
}
