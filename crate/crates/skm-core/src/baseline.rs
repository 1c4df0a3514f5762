//! Exact full-pass baselines: Lloyd updates, clustering cost, k-means++ seeding.
//!
//! These read the whole matrix by design; they exist as ground truth for the
//! sampled iterations and as the reference cost in experiments.

use rand::Rng;

use crate::assignment::exact_label_of;
use crate::centroids::{sq_dist, CentroidSet};
use crate::cumtree::kahan_sum;
use crate::error::{Result, SkmError};
use crate::sample_access::SampleAccessMatrix;

/// One exact Lloyd update: label every point by nearest centroid (lowest
/// index on ties), replace each centroid by its cluster mean. A cluster that
/// captures no points keeps its previous centroid.
pub fn lloyd_iterate(m: &SampleAccessMatrix, c: &CentroidSet) -> Result<CentroidSet> {
    if c.d() != m.d() {
        return Err(SkmError::DimensionMismatch {
            expected: m.d(),
            got: c.d(),
        });
    }
    let d = m.d();
    let k = c.k();
    let mut sums = vec![0.0f64; k * d];
    let mut counts = vec![0u64; k];
    for i in 0..m.n() {
        let col = m.column(i)?;
        let label = exact_label_of(col, c).label;
        counts[label] += 1;
        let acc = &mut sums[label * d..(label + 1) * d];
        for (a, &v) in acc.iter_mut().zip(col.iter()) {
            *a += v;
        }
    }
    let mut data = Vec::with_capacity(k * d);
    for j in 0..k {
        if counts[j] == 0 {
            data.extend_from_slice(c.centroid(j));
        } else {
            let cnt = counts[j] as f64;
            data.extend(sums[j * d..(j + 1) * d].iter().map(|s| s / cnt));
        }
    }
    CentroidSet::new(d, data, c.iteration + 1)
}

/// Total clustering cost: the sum over points of the squared distance to the
/// nearest centroid (compensated summation over points).
pub fn rss_cost(m: &SampleAccessMatrix, c: &CentroidSet) -> Result<f64> {
    if c.d() != m.d() {
        return Err(SkmError::DimensionMismatch {
            expected: m.d(),
            got: c.d(),
        });
    }
    let mut costs = Vec::with_capacity(m.n());
    for i in 0..m.n() {
        let col = m.column(i)?;
        let best = c
            .iter()
            .map(|cent| sq_dist(col, cent))
            .fold(f64::INFINITY, f64::min);
        costs.push(best);
    }
    Ok(kahan_sum(costs))
}

/// k-means++ seeding: first centroid uniform, each subsequent centroid drawn
/// with probability proportional to its squared distance to the nearest
/// centroid chosen so far. If every remaining point has distance zero (all
/// duplicates of chosen centroids), the next centroid is drawn uniformly from
/// the not-yet-chosen points, so `k = n` returns every point exactly once.
pub fn kmeanspp_init<R: Rng + ?Sized>(
    m: &SampleAccessMatrix,
    k: usize,
    rng: &mut R,
) -> Result<CentroidSet> {
    let n = m.n();
    let d = m.d();
    if k == 0 {
        return Err(SkmError::InvalidParams {
            reason: "k must be positive".into(),
        });
    }
    if k > n {
        return Err(SkmError::KTooLarge { k, n });
    }

    let mut data = Vec::with_capacity(k * d);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    data.extend_from_slice(m.column(first)?);

    let mut dist2 = vec![0.0f64; n];
    for (i, slot) in dist2.iter_mut().enumerate() {
        *slot = sq_dist(m.column(i)?, &data[0..d]);
    }

    for picked in 1..k {
        let total = kahan_sum(dist2.iter().copied());
        let next = if total > 0.0 {
            weighted_pick(&dist2, total, rng)
        } else {
            uniform_unchosen_pick(&chosen, rng)
        };
        chosen[next] = true;
        let col = m.column(next)?;
        data.extend_from_slice(col);
        if picked + 1 < k {
            for (i, slot) in dist2.iter_mut().enumerate() {
                let nd = sq_dist(m.column(i)?, col);
                if nd < *slot {
                    *slot = nd;
                }
            }
        }
    }
    CentroidSet::new(d, data, 0)
}

/// Linear-scan draw proportional to `weights` (total precomputed, > 0).
fn weighted_pick<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = i;
        if u < acc {
            return i;
        }
    }
    // Rounding pushed u past the final cumulative value; take the last
    // positive-weight index.
    last_positive
}

/// Uniform draw among indices not yet chosen.
fn uniform_unchosen_pick<R: Rng + ?Sized>(chosen: &[bool], rng: &mut R) -> usize {
    let remaining = chosen.iter().filter(|&&c| !c).count();
    debug_assert!(remaining > 0);
    let mut target = rng.random_range(0..remaining);
    for (i, &c) in chosen.iter().enumerate() {
        if c {
            continue;
        }
        if target == 0 {
            return i;
        }
        target -= 1;
    }
    unreachable!("remaining count matched the chosen mask")
}
