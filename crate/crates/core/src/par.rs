//! Index-ordered parallel map over independent realizations.
//!
//! Results always come back in index order, so any fold over them is
//! independent of the number of worker threads. Without the `parallel`
//! feature the map runs sequentially.

use crate::error::{Error, Result};

/// `(0..n).map(f)` evaluated on `threads` workers (rayon's global pool when
/// `None`), collected in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match threads {
        None => Ok((0..n).into_par_iter().map(f).collect()),
        Some(0) => Err(Error::InvalidArgument("thread count must be positive".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot start thread pool: {e}")))?;
            Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if threads == Some(0) {
        return Err(Error::InvalidArgument("thread count must be positive".into()));
    }
    Ok((0..n).map(f).collect())
}

/// Whether this build runs realizations on multiple threads.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_results() {
        let a = map_indexed(1000, Some(1), |i| i * i).unwrap();
        let b = map_indexed(1000, Some(4), |i| i * i).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[999], 999 * 999);
        assert!(map_indexed(3, Some(0), |i| i).is_err());
    }
}
