//! Execution seam: data-parallel kernels run on rayon when the `parallel`
//! feature (default) is enabled and fall back to plain iterators otherwise.
//!
//! Reductions that feed reported numbers go through [`pairwise_sum`] on an
//! index-ordered buffer, so results are bit-identical regardless of feature
//! selection or thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n` preserving index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sums a slice by recursive pairwise splitting. Deterministic for a given
/// input order and more accurate than a running sum on long inputs.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const CHUNK: usize = 64;
    if v.len() <= CHUNK {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Pairwise-summed map over `0..n`.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    pairwise_sum(&map_indexed(n, f))
}

/// Maximum of `f` over `0..n`; returns `f64::NEG_INFINITY` for `n == 0`.
pub fn max_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let v = map_indexed(n, f);
    v.into_iter().fold(f64::NEG_INFINITY, f64::max)
}
