//! Small numerical helpers shared by the Monte Carlo estimators and the
//! verification grids.

use serde::{Deserialize, Serialize};

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, std_error: f64::NAN, n };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let std_error = if n > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Estimate { mean, std_error, n }
    }

    /// Unbiased sample variance.
    pub fn variance_of(xs: &[f64]) -> f64 {
        let e = Estimate::from_samples(xs);
        e.std_error * e.std_error * e.n as f64
    }

    /// `|mean - target| <= k * std_error`, inclusive so that a degenerate
    /// estimate with zero spread can still match an exact target.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }

    /// Distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Richardson extrapolation of statistics computed on grids `dt, 4 dt, 16 dt`
/// whose error expands in powers of `sqrt(dt)`.
///
/// One level is returned unchanged, two cancel the `sqrt(dt)` term and three
/// also cancel the `dt` term.
pub fn richardson_sqrt(levels: &[f64]) -> f64 {
    match levels {
        [e1] => *e1,
        [e1, e2] => 2.0 * e1 - e2,
        [e1, e2, e3, ..] => (8.0 * e1 - 6.0 * e2 + e3) / 3.0,
        [] => f64::NAN,
    }
}

/// Radical inverse of `index` in `base` (one coordinate of a Halton point).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

/// `n` points of the Halton sequence in `[0, 1)^D`, skipping the origin.
pub fn halton<const D: usize>(n: usize) -> Vec<[f64; D]> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    assert!(D <= PRIMES.len());
    (1..=n as u64)
        .map(|i| std::array::from_fn(|d| radical_inverse(i, PRIMES[d])))
        .collect()
}
