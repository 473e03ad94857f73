//! Replicate fan-out keyed by stream id.
//!
//! Every replicate owns an [`RngStream`](crate::RngStream) derived from
//! `(seed, domain, index)`, and results are collected in index order, so
//! outputs do not depend on the size of the surrounding rayon pool.

use rayon::prelude::*;

use crate::stochastic::RngStream;

/// Runs `f` for replicates `0..reps`, each with its own stream, and returns
/// the results in replicate order.
pub fn replicate<T, F>(seed: u64, domain: u16, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut RngStream) -> T + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::substream(seed, domain, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// [`replicate`] over an arbitrary index range, so that a sequence of
/// batches reproduces one long run.
pub fn replicate_range<T, F>(seed: u64, domain: u16, range: std::ops::Range<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut RngStream) -> T + Sync + Send,
{
    range
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::substream(seed, domain, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_of_pool_size() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| replicate(7, 3, 257, |_, rng| rng.uniform()))
        };
        assert_eq!(run(1), run(4));
    }
}
