//! Data-parallel helpers. With the `parallel` feature disabled every call
//! runs sequentially; results never depend on the schedule.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How batch work (levels, trials, simplex pricing) is scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// True when work will actually fan out over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `items.iter().map(f).collect()`, in parallel when enabled. Output order
/// matches input order.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Applies `f(row_index, row)` to consecutive `row_len` chunks of `data`.
pub fn for_each_row<F>(exec: Execution, data: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        data.par_chunks_mut(row_len).enumerate().for_each(|(i, r)| f(i, r));
        return;
    }
    let _ = exec;
    data.chunks_mut(row_len).enumerate().for_each(|(i, r)| f(i, r));
}

/// Lexicographically smallest `(key, index)` over `0..n` among indices where
/// `key` returns `Some`. Ties resolve to the lowest index on every schedule.
pub fn argmin<F>(exec: Execution, n: usize, key: F) -> Option<(f64, usize)>
where
    F: Fn(usize) -> Option<f64> + Sync + Send,
{
    let better = |a: Option<(f64, usize)>, b: Option<(f64, usize)>| match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
                Some(y)
            } else {
                Some(x)
            }
        }
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n)
            .into_par_iter()
            .with_min_len(4096)
            .map(|j| key(j).map(|v| (v, j)))
            .reduce(|| None, better);
    }
    let _ = exec;
    (0..n).map(|j| key(j).map(|v| (v, j))).fold(None, better)
}
