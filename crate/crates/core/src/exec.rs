//! Data-parallel helpers. With the `parallel` feature the work is spread
//! over the current rayon pool; without it (or with
//! [`Execution::Sequential`]) everything runs on the calling thread.
//! Results always come back in input order, and reductions are done over
//! fixed-size chunks so floating-point sums do not depend on thread count.

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

    /// Ordered map over a slice.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Ordered fallible map; the first error in input order is returned.
    pub fn try_map<T, U, E, F>(self, items: &[T], f: F) -> Result<Vec<U>, E>
    where
        T: Sync,
        U: Send,
        E: Send,
        F: Fn(&T) -> Result<U, E> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }

    /// Deterministic sum of `f` over `items`: per-chunk partial sums
    /// (computed in any order) are combined left to right.
    pub fn chunked_sum<T, S, F>(self, items: &[T], chunk: usize, zero: S, f: F) -> S
    where
        T: Sync,
        S: Send + Sync + Copy + std::ops::Add<Output = S>,
        F: Fn(&T) -> S + Sync + Send,
    {
        let chunk = chunk.max(1);
        let partial = |c: &[T]| c.iter().fold(zero, |acc, x| acc + f(x));
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            let parts: Vec<S> = items.par_chunks(chunk).map(partial).collect();
            return parts.into_iter().fold(zero, |a, b| a + b);
        }
        items.chunks(chunk).map(partial).fold(zero, |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let xs: Vec<f64> = (0..100_000).map(|i| (i as f64).sin()).collect();
        let a = Execution::Sequential.chunked_sum(&xs, 1024, 0.0, |x| x * x);
        let b = Execution::Parallel.chunked_sum(&xs, 1024, 0.0, |x| x * x);
        assert_eq!(a.to_bits(), b.to_bits());
        let m1 = Execution::Sequential.map(&xs, |x| x.exp());
        let m2 = Execution::Parallel.map(&xs, |x| x.exp());
        assert_eq!(m1, m2);
    }

    #[test]
    fn try_map_reports_first_error() {
        let xs = [1, 2, 3, 4];
        let r: Result<Vec<i32>, i32> = Execution::Parallel.try_map(&xs, |&x| if x >= 3 { Err(x) } else { Ok(x) });
        assert_eq!(r, Err(3));
    }
}
