//! Cumulative-weight index for O(log m) proportional sampling.
//!
//! The weights here are static once built (matrix norms never change), so a
//! compensated prefix-sum array plus binary search beats a Fenwick or segment
//! tree: same sampling cost, half the memory, and a cache-friendly layout. The
//! build uses Kahan summation so the root total is accurate to a few ulps even
//! for tens of millions of leaves.

use rand::Rng;

use crate::error::{Result, SkmError};

/// Kahan (compensated) sum over an iterator, in iteration order.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Append the compensated prefix sums of `weights` to `out`.
///
/// `out[start + i]` becomes `w_0 + ... + w_i`; returns the total. Errors on a
/// negative or non-finite weight (index reported relative to `weights`).
pub fn push_prefix(weights: &[f64], out: &mut Vec<f64>) -> Result<f64> {
    let mut sum = 0.0;
    let mut comp = 0.0;
    out.reserve(weights.len());
    for (index, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(SkmError::InvalidWeight { index });
        }
        let y = w - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        out.push(sum);
    }
    Ok(sum)
}

/// Draw an index proportional to the weights encoded by a prefix-sum slice.
///
/// `total` must be the final prefix value. The caller guarantees `total > 0`.
#[inline]
pub fn sample_prefix<R: Rng + ?Sized>(prefix: &[f64], total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    // First index whose cumulative weight strictly exceeds u. Zero-weight
    // leaves have the same cumulative value as their predecessor and are
    // therefore never selected.
    let i = prefix.partition_point(|&c| c <= u);
    i.min(prefix.len() - 1)
}

/// Cumulative-weight index over a fixed nonnegative weight vector.
#[derive(Debug, Clone)]
pub struct CumulativeTree {
    prefix: Vec<f64>,
    total: f64,
}

impl CumulativeTree {
    /// Build from leaf weights. Weights must be finite and nonnegative; an
    /// all-zero vector is allowed to *exist* (sampling from it errors).
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let mut prefix = Vec::new();
        let total = push_prefix(weights, &mut prefix)?;
        Ok(Self { prefix, total })
    }

    /// Number of leaves.
    pub fn len(&self) -> usize {
        self.prefix.len()
    }

    /// True when there are no leaves.
    pub fn is_empty(&self) -> bool {
        self.prefix.is_empty()
    }

    /// Root weight: the compensated sum of all leaf weights.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Weight of leaf `i`, reconstructed from adjacent prefix values.
    ///
    /// Exact for leaf 0; later leaves are accurate to ~1 ulp of the running
    /// total, which is all the tests need.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 {
            self.prefix[0]
        } else {
            self.prefix[i] - self.prefix[i - 1]
        }
    }

    /// Draw a leaf index with probability proportional to its weight.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        if self.total <= 0.0 || self.prefix.is_empty() {
            return Err(SkmError::DegenerateDistribution {
                what: "cumulative tree with zero total weight".into(),
            });
        }
        Ok(sample_prefix(&self.prefix, self.total, rng))
    }
}
