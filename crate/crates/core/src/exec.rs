//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature disabled, [`Execution::Parallel`] runs the
//! same loops sequentially. Results never depend on the execution mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `f(0), …, f(n-1)` in index order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

pub fn map_slice<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_range(exec, items.len(), |i| f(&items[i]))
}

/// First `Some` by index, identical in both modes.
pub fn find_first<R, F>(exec: Execution, n: usize, f: F) -> Option<R>
where
    R: Send,
    F: Fn(usize) -> Option<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().find_map_first(f);
    }
    let _ = exec;
    (0..n).find_map(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i * i) % 7;
        assert_eq!(map_range(Execution::Sequential, 50, f), map_range(Execution::Parallel, 50, f));
        let g = |i: usize| if i % 13 == 12 { Some(i) } else { None };
        assert_eq!(find_first(Execution::Parallel, 100, g), Some(12));
        assert_eq!(find_first(Execution::Sequential, 100, g), Some(12));
        assert_eq!(find_first(Execution::Parallel, 10, g), None);
    }
}
