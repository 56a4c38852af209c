//! Thin fan-out helpers over rayon with a sequential fallback.
//!
//! Every call site maps independent work items and then reduces in index
//! order, so the parallel and sequential builds produce bit-identical
//! results for any worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, returning results in index order.
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

/// Map `f` over a slice, returning results in input order.
pub fn map_slice<'a, I, T, F>(items: &'a [I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&'a I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
