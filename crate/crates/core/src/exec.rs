//! Data-parallel dispatch.
//!
//! Every parallel loop in the crate goes through this module. With the
//! `parallel` feature (default) work is spread over the rayon pool; without
//! it, or inside [`with_strategy`]`(Strategy::Sequential, ..)`, the same
//! closures run in index order on the calling thread. Reductions are either
//! collected in index order or performed on integer counters, so results do
//! not depend on the strategy or on the number of workers.

use std::cell::Cell;

/// How a data-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Sequential,
    Parallel,
}

thread_local! {
    static OVERRIDE: Cell<Option<Strategy>> = const { Cell::new(None) };
}

impl Default for Strategy {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Strategy::Parallel
        } else {
            Strategy::Sequential
        }
    }
}

/// Strategy in effect on the current thread.
pub fn current() -> Strategy {
    OVERRIDE.with(|o| o.get()).unwrap_or_default()
}

/// Runs `f` with `strategy` forced on the current thread.
pub fn with_strategy<R>(strategy: Strategy, f: impl FnOnce() -> R) -> R {
    let prev = OVERRIDE.with(|o| o.replace(Some(strategy)));
    let out = f();
    OVERRIDE.with(|o| o.set(prev));
    out
}

/// `(0..n).map(f).collect()`, possibly in parallel; output is in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match current() {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Parallel map over a slice, output in input order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_indexed(items.len(), |i| f(&items[i]))
}

/// Integer histogram: `f(i)` names the bin that item `i` falls into.
pub fn count_bins<F>(n: usize, n_bins: usize, f: F) -> Vec<u64>
where
    F: Fn(usize) -> Option<usize> + Sync + Send,
{
    let add = |mut acc: Vec<u64>, i: usize| {
        if let Some(b) = f(i) {
            acc[b] += 1;
        }
        acc
    };
    match current() {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            (0..n)
                .into_par_iter()
                .fold(|| vec![0u64; n_bins], add)
                .reduce(
                    || vec![0u64; n_bins],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        a
                    },
                )
        }
        _ => (0..n).fold(vec![0u64; n_bins], add),
    }
}

/// Integer histogram where each item may add to several bins:
/// `f(i, bins)` increments `bins` for item `i`.
pub fn accumulate_bins<F>(n: usize, n_bins: usize, f: F) -> Vec<u64>
where
    F: Fn(usize, &mut [u64]) + Sync + Send,
{
    let add = |mut acc: Vec<u64>, i: usize| {
        f(i, &mut acc);
        acc
    };
    match current() {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            (0..n)
                .into_par_iter()
                .fold(|| vec![0u64; n_bins], add)
                .reduce(
                    || vec![0u64; n_bins],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        a
                    },
                )
        }
        _ => (0..n).fold(vec![0u64; n_bins], add),
    }
}

/// Sum of `f(i)` over `0..n` in exact integer arithmetic.
pub fn sum_u64<F>(n: usize, f: F) -> u64
where
    F: Fn(usize) -> u64 + Sync + Send,
{
    match current() {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).sum()
        }
        _ => (0..n).map(f).sum(),
    }
}
