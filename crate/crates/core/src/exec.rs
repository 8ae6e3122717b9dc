//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Exec::Parallel`] fans work out
//! over the rayon global pool. Without it every call runs sequentially, so
//! results never depend on the feature set: work items are independent and
//! outputs keep input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this build can actually run in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn par_map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn par_map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Smallest index `i < n` with `pred(i)`, possibly searched in parallel.
pub fn find_first<F>(exec: Exec, n: usize, pred: F) -> Option<usize>
where
    F: Fn(usize) -> bool + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().find_first(|&i| pred(i)),
        _ => (0..n).find(|&i| pred(i)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = par_map(Exec::Sequential, &items, |x| x * x);
        let par = par_map(Exec::Parallel, &items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(
            par_map_range(Exec::Parallel, 10, |i| i + 1),
            (1..=10).collect::<Vec<_>>()
        );
        assert_eq!(find_first(Exec::Parallel, 1000, |i| i % 97 == 96), Some(96));
        assert_eq!(find_first(Exec::Sequential, 10, |_| false), None);
    }
}
