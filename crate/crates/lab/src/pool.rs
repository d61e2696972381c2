//! Fixed-size worker pool over independent sweep points.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

/// Applies `f` to every item on up to `workers` threads. Results come back in
/// item order regardless of which worker finished first.
pub fn map_ordered<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..50).collect();
        let slow_first = |&x: &u64| {
            std::thread::sleep(std::time::Duration::from_micros(50 * (50 - x)));
            x * x
        };
        let a = map_ordered(&items, 1, slow_first);
        let b = map_ordered(&items, 4, slow_first);
        assert_eq!(a, b);
        assert!(map_ordered(&[] as &[u64], 3, |x| *x).is_empty());
    }
}
