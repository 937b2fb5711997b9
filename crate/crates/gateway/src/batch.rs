use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Maps `f` over `items` on up to `parallelism` threads. Results come back in
/// input order; `on_done` sees each result as soon as it is ready.
pub fn parallel_map<T, R, F, D>(items: &[T], parallelism: usize, f: F, on_done: D) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
    D: Fn(usize, &R) + Sync,
{
    let workers = parallelism.max(1).min(items.len());
    if workers <= 1 {
        return items
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let r = f(i, t);
                on_done(i, &r);
                r
            })
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                on_done(i, &r);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_under_parallelism() {
        let items: Vec<u64> = (0..50).collect();
        let slow_first = |_: usize, x: &u64| {
            std::thread::sleep(std::time::Duration::from_micros(50 * (50 - x)));
            x * 2
        };
        let serial = parallel_map(&items, 1, slow_first, |_, _| {});
        let parallel = parallel_map(&items, 8, slow_first, |_, _| {});
        assert_eq!(serial, parallel);
        assert!(parallel_map(&Vec::<u64>::new(), 4, slow_first, |_, _| {}).is_empty());
    }
}
