//! Bounded worker pool over slices, preserving input order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Apply `f` to every item with at most `workers` threads in flight.
/// Results come back in input order, so downstream reductions are
/// deterministic regardless of scheduling.
pub fn parallel_map<T, U, F>(items: &[T], workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<U>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let value = f(i, &items[i]);
                slots.lock().unwrap()[i] = Some(value);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|v| v.expect("every slot filled"))
        .collect()
}

/// `parallel_map` over fallible work; the first error in input order wins.
pub fn try_parallel_map<T, U, F>(items: &[T], workers: usize, f: F) -> crate::Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> crate::Result<U> + Sync,
{
    parallel_map(items, workers, f).into_iter().collect()
}
