//! Replication fan-out, per-replication random streams and estimate merging.
//!
//! Every replication owns a ChaCha8 generator keyed by the master seed and
//! positioned on stream number `replication index`. Results are collected in
//! replication order and reduced sequentially with compensated summation, so
//! an estimate depends only on `(inputs, master_seed, n_reps)` and never on
//! the size of the rayon pool that executed it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type Stream = ChaCha8Rng;

/// The random stream for replication `index` under `master_seed`.
pub fn replication_stream(master_seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` once per replication, in parallel, and returns the outputs in
/// replication order.
pub fn replicate<T, F>(n_reps: usize, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut Stream) -> T + Sync + Send,
{
    (0..n_reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replication_stream(master_seed, i);
            f(i, &mut rng)
        })
        .collect()
}

/// Fallible variant of [`replicate`]; the first error in replication order wins.
pub fn try_replicate<T, F>(n_reps: usize, master_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut Stream) -> Result<T> + Sync + Send,
{
    replicate(n_reps, master_seed, f).into_iter().collect()
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_reps: usize,
    pub master_seed: u64,
}

impl McEstimate {
    /// Sample mean and s / sqrt(n) of `samples`, which must hold at least two values.
    pub fn from_samples(samples: &[f64], master_seed: u64) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 replications, got {n}")));
        }
        let mean = compensated_sum(samples.iter().copied()) / n as f64;
        let ss = compensated_sum(samples.iter().map(|&x| (x - mean) * (x - mean)));
        let var = ss / (n - 1) as f64;
        Ok(Self { mean, std_error: (var / n as f64).sqrt(), n_reps: n, master_seed })
    }

    /// Distance from `target` in standard-error units. Zero-SE estimates
    /// report 0 on exact agreement and infinity otherwise.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }
}

pub(crate) fn check_reps(n_reps: usize) -> Result<()> {
    if n_reps < 2 {
        return Err(Error::InvalidParameter(format!("n_reps must be at least 2, got {n_reps}")));
    }
    Ok(())
}
