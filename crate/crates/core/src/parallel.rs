//! Path-level parallelism with a deterministic, index-ordered result.
//!
//! With the `parallel` feature (default) paths run on the current rayon pool;
//! without it they run in order on the calling thread. Either way the output
//! vector is ordered by path index and the first failing path (by index) is
//! the error reported.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Generator type used for every Monte-Carlo path.
pub type PathRng = ChaCha8Rng;

/// Seed of path `index` under `experiment_seed`.
pub fn path_seed(experiment_seed: u64, index: usize) -> u64 {
    experiment_seed ^ index as u64
}

pub fn path_rng(experiment_seed: u64, index: usize) -> PathRng {
    PathRng::seed_from_u64(path_seed(experiment_seed, index))
}

/// Run `f(0), …, f(n−1)` and collect the results in index order.
pub fn map_paths<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_paths_parallel(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_paths_sequential(n, f)
    }
}

pub fn map_paths_sequential<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..n).map(|i| f(i).map_err(|e| e.in_path(i))).collect()
}

#[cfg(feature = "parallel")]
pub fn map_paths_parallel<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    let results: Vec<Result<T>> = (0..n).into_par_iter().map(&f).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.in_path(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn ordered_results_and_first_error() {
        let out = map_paths(50, |i| Ok(i * i)).unwrap();
        assert_eq!(out, (0..50).map(|i| i * i).collect::<Vec<_>>());
        let err = map_paths(10, |i| {
            if i % 4 == 3 {
                Err(Error::param("boom"))
            } else {
                Ok(i)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::Path { path: 3, .. }));
    }

    #[test]
    fn seeds_xor_index() {
        assert_eq!(path_seed(0b1010, 3), 0b1001);
    }
}
