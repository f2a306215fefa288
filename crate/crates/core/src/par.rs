//! Data-parallel helpers. Without the `parallel` feature everything runs on
//! the calling thread.

use serde::{Deserialize, Serialize};

/// How independent jobs (seeds, family members, sample points) are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Parallelism {
    #[default]
    Sequential,
    /// Run on a pool of `n` threads. `0` uses the global pool.
    Threads(usize),
}

impl Parallelism {
    /// Map a `--jobs` count onto a policy; `1` means sequential.
    pub fn from_jobs(jobs: usize) -> Self {
        if jobs == 1 {
            Parallelism::Sequential
        } else {
            Parallelism::Threads(jobs)
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel")
            && !matches!(self, Parallelism::Sequential | Parallelism::Threads(1))
    }
}

/// Order-preserving map. Results are identical for every policy.
pub fn par_map<T, U, F>(items: &[T], policy: Parallelism, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if let Parallelism::Threads(n) = policy {
        if n != 1 {
            use rayon::prelude::*;
            let run = || items.par_iter().map(&f).collect();
            if n == 0 {
                return run();
            }
            match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => return pool.install(run),
                Err(_) => return run(),
            }
        }
    }
    let _ = policy;
    items.iter().map(f).collect()
}
