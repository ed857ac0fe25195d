//! Data-parallel execution helpers.
//!
//! Hot loops (per-sample gradients, ensemble members, per-trajectory work) are
//! expressed as order-preserving maps over index ranges. With the `parallel`
//! feature (default) they run on the rayon pool; without it they run
//! sequentially. Results are collected in index order and any floating-point
//! reduction happens after collection, in a fixed order, so output is
//! bit-identical across thread counts and across the two modes.

/// Execution mode for the order-preserving map helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[cfg(feature = "parallel")]
    Rayon,
}

impl Default for Parallelism {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Parallelism::Rayon
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Parallelism::Sequential
    }
}

/// Map `f` over `0..n`, returning results in index order.
pub fn map_indexed<U, F>(mode: Parallelism, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync,
{
    match mode {
        Parallelism::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
    }
}

/// Map `f` over `0..n` where `f` may fail; the first error (lowest index) wins.
pub fn try_map_indexed<U, F>(mode: Parallelism, n: usize, f: F) -> crate::Result<Vec<U>>
where
    U: Send,
    F: Fn(usize) -> crate::Result<U> + Sync,
{
    let results = map_indexed(mode, n, f);
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved_in_both_modes() {
        let seq = map_indexed(Parallelism::Sequential, 100, |i| i * i);
        assert_eq!(seq[7], 49);
        #[cfg(feature = "parallel")]
        {
            let par = map_indexed(Parallelism::Rayon, 100, |i| i * i);
            assert_eq!(seq, par);
        }
    }

    #[test]
    fn try_map_reports_first_error() {
        let r: crate::Result<Vec<usize>> = try_map_indexed(Parallelism::default(), 10, |i| {
            if i >= 3 {
                Err(crate::Error::Domain(format!("bad {i}")))
            } else {
                Ok(i)
            }
        });
        match r {
            Err(crate::Error::Domain(msg)) => assert_eq!(msg, "bad 3"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
