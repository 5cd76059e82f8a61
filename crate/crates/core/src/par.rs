//! Data-parallel helpers. With the `parallel` feature, per-cell maps over
//! large fields and sweep members run on rayon; otherwise everything runs
//! sequentially. Reductions are always sequential so results do not depend
//! on the thread count.

/// Fields with fewer cells than this are mapped sequentially.
pub const PAR_MIN_CELLS: usize = 8192;

/// Builds `out[i] = f(i)` for `i in 0..len`.
pub fn map_cells<F>(len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if len >= PAR_MIN_CELLS {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    (0..len).map(f).collect()
}

/// Execution policy for independent simulations (sweep members).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Run members concurrently on at most `jobs` threads (0 = rayon default).
    #[default]
    Parallel,
    Jobs(usize),
}

impl Execution {
    pub fn from_jobs(jobs: Option<usize>) -> Self {
        match jobs {
            None => Execution::Parallel,
            Some(1) => Execution::Sequential,
            Some(n) => Execution::Jobs(n),
        }
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map_members<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::Jobs(n) => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(e) => {
                    log::warn!("could not build a {n}-thread pool ({e}); running sequentially");
                    items.iter().map(f).collect()
                }
            }
        }
        #[cfg(not(feature = "parallel"))]
        _ => items.iter().map(f).collect(),
    }
}
