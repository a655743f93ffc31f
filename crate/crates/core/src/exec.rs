//! Ordered map helpers that run on rayon or on the calling thread.
//!
//! Results always come back in index order and every reduction downstream
//! is sequential, so outputs do not depend on the thread count.

use rayon::prelude::*;

pub(crate) fn map_indexed<T, F>(n: usize, sequential: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if sequential {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}

pub(crate) fn try_map_indexed<T, E, F>(n: usize, sequential: bool, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(n, sequential, f).into_iter().collect()
}
