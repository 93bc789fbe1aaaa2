//! Index-ordered map over independent tasks. With the `parallel` feature the
//! tasks run on the current rayon pool; results always come back in index
//! order, so any reduction over them is independent of scheduling.

#[cfg(feature = "parallel")]
pub(crate) fn map_ordered<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_ordered<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}
