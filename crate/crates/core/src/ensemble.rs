//! Seed derivation and parallel evaluation over independent runs.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Seed of ensemble member `index` under `base` (SplitMix64 finalizer).
pub fn member_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE5_E4B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds of `count` members under `base`.
pub fn member_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| member_seed(base, i)).collect()
}

/// Evaluates `f` on every seed in parallel, preserving order. The first
/// failing member (by position) is reported with its seed.
pub fn par_map_seeds<T, F>(seeds: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let out: Vec<Result<T>> = seeds.par_iter().map(|&s| f(s)).collect();
    let mut values = Vec::with_capacity(out.len());
    for (r, &seed) in out.into_iter().zip(seeds) {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                return Err(Error::Member {
                    seed,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(values)
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
