//! A bounded worker pool that preserves input order.
//!
//! Corpus-level commands are embarrassingly parallel over documents, but
//! their reports must not depend on scheduling. Workers pull the next unread
//! index from a shared cursor and write into a per-index slot, so the caller
//! gets results in input order no matter which worker finished first.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Applies `f` to every item on at most `jobs` threads; results come back in
/// input order. Panics in `f` propagate to the caller.
pub fn ordered_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    assert!(jobs >= 1, "the pool needs at least one worker");
    let workers = jobs.min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let mut slots: Vec<Option<R>> = Vec::new();
    slots.resize_with(items.len(), || None);
    let slots = Mutex::new(slots);
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let result = f(&items[i]);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every index was claimed by some worker"))
        .collect()
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_are_in_input_order_for_any_worker_count() {
        let items: Vec<usize> = (0..97).collect();
        for jobs in [1, 2, 3, 8, 200] {
            let out = ordered_map(&items, jobs, |&i| i * i);
            let expected: Vec<usize> = items.iter().map(|&i| i * i).collect();
            assert_eq!(out, expected, "jobs = {jobs}");
        }
    }

    #[test]
    fn worker_counts_beyond_the_item_count_are_harmless() {
        let out = ordered_map(&[7usize], 64, |&i| i + 1);
        assert_eq!(out, vec![8]);
        let empty: Vec<usize> = Vec::new();
        assert!(ordered_map(&empty, 4, |&i: &usize| i).is_empty());
    }

    #[test]
    fn uneven_work_still_lands_in_the_right_slots() {
        // Later items finish first; order must hold anyway.
        let items: Vec<u64> = (0..16).collect();
        let out = ordered_map(&items, 4, |&i| {
            std::thread::sleep(std::time::Duration::from_millis(16 - i));
            i
        });
        assert_eq!(out, items);
    }
}
