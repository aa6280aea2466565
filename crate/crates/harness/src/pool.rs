use std::thread;

/// Applies `f` to every index in `0..count` on up to `jobs` threads.
///
/// Each worker takes a contiguous index range; the output is in index order
/// whatever the number of workers.
pub fn parallel_map<T, F>(count: u64, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let jobs = (jobs.max(1) as u64).min(count.max(1));
    if jobs == 1 {
        return (0..count).map(&f).collect();
    }
    let chunk = count.div_ceil(jobs);
    let f = &f;
    thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                let (lo, hi) = (j * chunk, ((j + 1) * chunk).min(count));
                scope.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Worker count used when none is given.
pub fn default_jobs() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}
