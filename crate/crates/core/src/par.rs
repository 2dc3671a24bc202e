//! Fixed-size work blocks evaluated in parallel and returned in block order.

use rayon::prelude::*;

/// Splits `0..n` into consecutive blocks of `block` items and evaluates `f` on
/// each block range in parallel. The result vector is in block order, so a
/// sequential fold over it is independent of the thread count.
pub fn map_blocks<T, F>(n: u64, block: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<u64>) -> T + Sync + Send,
{
    assert!(block > 0);
    let n_blocks = n.div_ceil(block);
    (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * block;
            f(start..(start + block).min(n))
        })
        .collect()
}
