//! Deterministic data-parallel map over an index range.

use std::thread;

/// Worker count used when the caller does not choose one.
pub fn available_threads() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

/// Evaluate `f(i)` for `i in 0..n` on `threads` workers.
///
/// The range is split into contiguous blocks of near-equal size, one per
/// worker, and results come back in index order, so the output never depends
/// on the thread count.
pub fn par_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.max(1).min(n.max(1));
    if threads == 1 {
        return (0..n).map(&f).collect();
    }
    let base = n / threads;
    let extra = n % threads;
    let mut bounds = Vec::with_capacity(threads);
    let mut start = 0;
    for w in 0..threads {
        let len = base + usize::from(w < extra);
        bounds.push((start, start + len));
        start += len;
    }
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = bounds
            .iter()
            .map(|&(lo, hi)| s.spawn(move || (lo..hi).map(f).collect::<Vec<T>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_threads() {
        let one = par_map(103, 1, |i| i * i);
        for t in [2, 3, 8, 200] {
            assert_eq!(par_map(103, t, |i| i * i), one);
        }
    }

    #[test]
    fn empty_range() {
        assert!(par_map(0, 4, |i| i).is_empty());
    }
}
