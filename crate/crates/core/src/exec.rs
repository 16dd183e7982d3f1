//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] runs on the
//! rayon global pool; without it every mode runs sequentially. Results are
//! always returned in input order, so both modes produce identical output.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Whether this build can actually run in parallel.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Maps `f` over `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Maps `f` over a slice, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<f64> = (0..1000).map(|k| k as f64 * 0.37).collect();
        let a = Execution::Parallel.map(&xs, |x| x.sin() * x);
        let b = Execution::Sequential.map(&xs, |x| x.sin() * x);
        assert_eq!(a, b);
        let c = Execution::Parallel.map_range(17, |k| k * k);
        assert_eq!(c, (0..17).map(|k| k * k).collect::<Vec<_>>());
    }
}
