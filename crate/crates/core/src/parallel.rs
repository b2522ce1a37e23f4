//! Interleaved work distribution: worker `t` of `n` takes items
//! `t, t + n, t + 2n, ...`. Results come back in item order.

use std::thread;

pub fn available_threads() -> usize {
    thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn map_interleaved<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let n = threads.max(1).min(items.len().max(1));
    if n == 1 {
        return items.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let f = &f;
    let parts: Vec<Vec<(usize, R)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..n)
            .map(|t| s.spawn(move || (t..items.len()).step_by(n).map(|i| (i, f(i, &items[i]))).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    for part in parts {
        for (i, r) in part {
            slots[i] = Some(r);
        }
    }
    slots.into_iter().map(|r| r.expect("every item visited")).collect()
}

/// Like [`map_interleaved`] but stops at the first error in item order.
pub fn try_map_interleaved<T, R, E, F>(items: &[T], threads: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(usize, &T) -> Result<R, E> + Sync,
{
    map_interleaved(items, threads, f).into_iter().collect()
}
