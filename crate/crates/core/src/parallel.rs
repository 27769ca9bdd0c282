//! Data-parallel map over independent jobs (trials, probe samples).
//!
//! With the `parallel` feature the jobs run on a rayon pool whose size can be
//! capped through `RAMOPT_THREADS`; without it they run in order on the
//! calling thread. Results are always returned in job order.

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "RAMOPT_THREADS";

/// Worker cap from `RAMOPT_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Run `f(0..n)` sequentially.
pub fn map_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Run `f(0..n)` on a rayon pool of `threads` workers (`None` = rayon default).
#[cfg(feature = "parallel")]
pub fn map_parallel<T, F>(n: usize, threads: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let run = || (0..n).into_par_iter().map(&f).collect::<Vec<T>>();
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log::warn!("could not build a {t}-thread pool ({e}); using the global pool");
                run()
            }
        },
        None => run(),
    }
}

/// Run `f(0..n)` with whatever execution strategy this build provides.
pub fn map_jobs<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(n, thread_cap(), f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(n, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_job_order() {
        let out = map_jobs(50, |i| i * i);
        assert_eq!(out, (0..50).map(|i| i * i).collect::<Vec<_>>());
        assert_eq!(map_sequential(3, |i| i + 1), vec![1, 2, 3]);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn capped_pool_matches_sequential() {
        let f = |i: usize| (i as f64).sqrt();
        assert_eq!(map_parallel(20, Some(2), f), map_sequential(20, f));
    }
}
