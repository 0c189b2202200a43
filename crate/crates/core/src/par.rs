//! Order-preserving data-parallel helpers.
//!
//! Every helper returns results in input order regardless of the execution
//! mode, so switching between [`Execution::Parallel`] and
//! [`Execution::Sequential`] never changes an output file.

/// How a data-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// rayon's global pool. Without the `parallel` feature this degrades to
    /// sequential execution.
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Maps every item to a list and concatenates the lists in input order.
pub fn flat_map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Vec<R> + Sync + Send,
{
    map(exec, items, f).into_iter().flatten().collect()
}

/// Folds chunks independently and merges the partial results.
///
/// `merge` must be associative and commutative for the result to be
/// independent of the execution mode.
pub fn map_reduce<T, A, I, F, M>(exec: Execution, items: &[T], init: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &T) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items
            .par_iter()
            .fold(&init, |mut acc, item| {
                fold(&mut acc, item);
                acc
            })
            .reduce(&init, &merge);
    }
    let _ = (exec, &merge);
    let mut acc = init();
    for item in items {
        fold(&mut acc, item);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..10_000).collect();
        let a = map(Execution::Parallel, &xs, |x| x * 3);
        let b = map(Execution::Sequential, &xs, |x| x * 3);
        assert_eq!(a, b);

        let fa = flat_map(Execution::Parallel, &xs, |x| vec![*x; (*x % 3) as usize]);
        let fb = flat_map(Execution::Sequential, &xs, |x| vec![*x; (*x % 3) as usize]);
        assert_eq!(fa, fb);

        let sum = |e| map_reduce(e, &xs, || 0u64, |a, x| *a += x, |a, b| a + b);
        assert_eq!(sum(Execution::Parallel), sum(Execution::Sequential));
    }
}
