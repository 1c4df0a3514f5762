//! Point-to-centroid assignment: exact, and relaxed via sampled inner products.
//!
//! The relaxed path never reads a whole column per centroid in spirit: the
//! squared distance `||v - c||^2 = ||v||^2 + ||c||^2 - 2 <v, c>` needs only the
//! inner product, which is estimated by importance-sampling coordinates of `v`
//! proportional to their squared mass. A median of group means turns the
//! bounded-variance single-sample estimator into an additive `tau/4` estimate
//! with failure probability `delta_share`, which makes every relaxed label
//! correct up to `tau` in squared distance (with the stated probability).

use rand::Rng;

use crate::centroids::{sq_dist, CentroidSet};
use crate::cumtree::sample_prefix;
use crate::error::{Result, SkmError};
use crate::sample_access::SampleAccessMatrix;

/// Knobs for the median-of-means estimator. The defaults implement the
/// analyzed guarantee; tests shrink them to probe failure behavior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Group-count multiplier: `K = ceil(groups_factor * ln(1/delta_share))`.
    pub groups_factor: f64,
    /// Group-size multiplier:
    /// `N = ceil(group_size_factor * ||v||^2 ||c||^2 / tau^2)`.
    pub group_size_factor: f64,
    /// Zero-noise test hook: replace every estimate with the exact inner
    /// product (zero samples drawn). Isolates label logic from sampling noise.
    pub oracle: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            groups_factor: 8.0,
            group_size_factor: 64.0,
            oracle: false,
        }
    }
}

/// Outcome of labeling one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelResult {
    /// Index of the chosen centroid (lowest index wins ties).
    pub label: usize,
    /// Squared distances per centroid: exact values on the exact path,
    /// estimates on the sampled path.
    pub dists_sq: Vec<f64>,
    /// Estimator samples drawn (0 on the exact path).
    pub samples_used: u64,
    /// True when distances are exact.
    pub exact: bool,
}

/// Label column `i` by exact squared distances. Counts `d` entry reads.
pub fn exact_label(m: &SampleAccessMatrix, i: usize, c: &CentroidSet) -> Result<LabelResult> {
    if c.d() != m.d() {
        return Err(SkmError::DimensionMismatch {
            expected: m.d(),
            got: c.d(),
        });
    }
    let col = m.column(i)?;
    Ok(exact_label_of(col, c))
}

/// Label an already-read column by exact squared distances (no entry reads;
/// the caller owns the slice and its accounting).
pub fn exact_label_of(col: &[f64], c: &CentroidSet) -> LabelResult {
    let dists_sq: Vec<f64> = c.iter().map(|cent| sq_dist(col, cent)).collect();
    LabelResult {
        label: argmin(&dists_sq),
        dists_sq,
        samples_used: 0,
        exact: true,
    }
}

/// Estimate `<v_i, c>` to additive error `tau / 4` with probability at least
/// `1 - delta_share`, by a median of `K` means of `N` importance-sampled
/// coordinate estimates. Returns `(estimate, samples_drawn)`.
///
/// Exact short-circuits (zero samples): a zero column or zero `c` has inner
/// product exactly 0.
///
/// Counts `d` entry reads when sampling happens: the per-coordinate sample
/// values are materialized once from the column and then indexed per draw,
/// which leaves the estimate bit-identical to recomputing per draw.
pub fn estimate_inner_product<R: Rng + ?Sized>(
    m: &SampleAccessMatrix,
    i: usize,
    c: &[f64],
    tau: f64,
    delta_share: f64,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<(f64, u64)> {
    if c.len() != m.d() {
        return Err(SkmError::DimensionMismatch {
            expected: m.d(),
            got: c.len(),
        });
    }
    validate_tau_delta(tau, delta_share)?;
    let col_sq = m.col_sq_norm(i)?;
    let c_sq: f64 = c.iter().map(|v| v * v).sum();
    if col_sq == 0.0 || c_sq == 0.0 {
        return Ok((0.0, 0));
    }
    let col = m.column(i)?;
    Ok(estimate_from_parts(
        col,
        m.entry_prefix_of(i),
        col_sq,
        c,
        c_sq,
        tau,
        delta_share,
        cfg,
        rng,
    ))
}

/// Core estimator over pre-fetched column data. `prefix` is the cumulative
/// squared-entry weight of `col` and `col_sq` its total.
#[allow(clippy::too_many_arguments)]
pub(crate) fn estimate_from_parts<R: Rng + ?Sized>(
    col: &[f64],
    prefix: &[f64],
    col_sq: f64,
    c: &[f64],
    c_sq: f64,
    tau: f64,
    delta_share: f64,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> (f64, u64) {
    if col_sq == 0.0 || c_sq == 0.0 {
        return (0.0, 0);
    }
    if cfg.oracle {
        let exact: f64 = col.iter().zip(c.iter()).map(|(&v, &cl)| v * cl).sum();
        return (exact, 0);
    }
    let k_groups = (cfg.groups_factor * (1.0 / delta_share).ln())
        .ceil()
        .max(1.0) as usize;
    let group_size = (cfg.group_size_factor * col_sq * c_sq / (tau * tau))
        .ceil()
        .max(1.0) as usize;

    // Sample value when coordinate l is drawn (prob v_l^2 / ||v||^2):
    // X_l = ||v||^2 * c_l / v_l, so E[X] = <v, c> and E[X^2] <= ||v||^2 ||c||^2
    // (equality only when v has full support; zero coordinates are never drawn).
    let x: Vec<f64> = col
        .iter()
        .zip(c.iter())
        .map(|(&v, &cl)| if v == 0.0 { 0.0 } else { col_sq * cl / v })
        .collect();

    let mut means = Vec::with_capacity(k_groups);
    for _ in 0..k_groups {
        let mut sum = 0.0;
        for _ in 0..group_size {
            let l = sample_prefix(prefix, col_sq, rng);
            sum += x[l];
        }
        means.push(sum / group_size as f64);
    }
    means.sort_by(f64::total_cmp);
    let est = if k_groups % 2 == 1 {
        means[k_groups / 2]
    } else {
        0.5 * (means[k_groups / 2 - 1] + means[k_groups / 2])
    };
    (est, (k_groups * group_size) as u64)
}

/// Label column `i` with relaxed (sampled) squared distances: each centroid's
/// distance is estimated within `tau / 2` with probability `1 - delta / k`,
/// so the chosen label misses the best squared distance by at most `tau`
/// with probability at least `1 - delta`.
///
/// Counts `d` entry reads (the column is fetched once and shared across all
/// centroid estimates).
pub fn approx_label<R: Rng + ?Sized>(
    m: &SampleAccessMatrix,
    i: usize,
    c: &CentroidSet,
    tau: f64,
    delta: f64,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<LabelResult> {
    if c.d() != m.d() {
        return Err(SkmError::DimensionMismatch {
            expected: m.d(),
            got: c.d(),
        });
    }
    validate_tau_delta(tau, delta)?;
    let col_sq = m.col_sq_norm(i)?;
    let delta_share = delta / c.k() as f64;

    if col_sq == 0.0 {
        // Inner products with the zero column are exactly 0; distances reduce
        // to centroid norms with no sampling at all.
        let dists_sq = c.sq_norms();
        return Ok(LabelResult {
            label: argmin(&dists_sq),
            dists_sq,
            samples_used: 0,
            exact: true,
        });
    }

    let col = m.column(i)?;
    let prefix = m.entry_prefix_of(i);
    let mut dists_sq = Vec::with_capacity(c.k());
    let mut samples = 0u64;
    for cent in c.iter() {
        let c_sq: f64 = cent.iter().map(|v| v * v).sum();
        let (est, used) =
            estimate_from_parts(col, prefix, col_sq, cent, c_sq, tau, delta_share, cfg, rng);
        samples += used;
        dists_sq.push(col_sq + c_sq - 2.0 * est);
    }
    Ok(LabelResult {
        label: argmin(&dists_sq),
        dists_sq,
        samples_used: samples,
        exact: cfg.oracle,
    })
}

fn validate_tau_delta(tau: f64, delta: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(SkmError::InvalidTau { tau });
    }
    if !(delta > 0.0) || !(delta < 1.0) {
        return Err(SkmError::InvalidDelta { delta });
    }
    Ok(())
}

/// Index of the smallest value; the lowest index wins ties.
#[inline]
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = j;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn simple_matrix() -> SampleAccessMatrix {
        // Columns: (3, 4), (0, 2), (0, 0).
        SampleAccessMatrix::from_columns(2, 3, vec![3.0, 4.0, 0.0, 2.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn exact_label_picks_nearest_with_lowest_index_ties() {
        let m = simple_matrix();
        let c = CentroidSet::from_rows(&[vec![3.0, 4.0], vec![0.0, 0.0]], 0).unwrap();
        let r = exact_label(&m, 0, &c).unwrap();
        assert_eq!(r.label, 0);
        assert_eq!(r.dists_sq, vec![0.0, 25.0]);
        assert!(r.exact);

        // Equidistant point: both centroids at distance^2 = 4 + 1 = 5.
        let c = CentroidSet::from_rows(&[vec![2.0, 1.0], vec![-2.0, 3.0]], 0).unwrap();
        let r = exact_label(&m, 1, &c).unwrap();
        assert_eq!(r.dists_sq[0], r.dists_sq[1]);
        assert_eq!(r.label, 0, "ties must resolve to the lowest index");
    }

    #[test]
    fn exact_label_rejects_dimension_mismatch() {
        let m = simple_matrix();
        let c = CentroidSet::from_rows(&[vec![1.0, 2.0, 3.0]], 0).unwrap();
        assert_eq!(
            exact_label(&m, 0, &c).unwrap_err(),
            SkmError::DimensionMismatch {
                expected: 2,
                got: 3
            }
        );
    }

    #[test]
    fn estimator_short_circuits_zero_cases() {
        let m = simple_matrix();
        let cfg = EstimatorConfig::default();
        let mut rng = stream(3);
        // Zero column.
        let (est, used) =
            estimate_inner_product(&m, 2, &[1.0, 1.0], 0.5, 0.1, &cfg, &mut rng).unwrap();
        assert_eq!((est, used), (0.0, 0));
        // Zero centroid.
        let (est, used) =
            estimate_inner_product(&m, 0, &[0.0, 0.0], 0.5, 0.1, &cfg, &mut rng).unwrap();
        assert_eq!((est, used), (0.0, 0));
    }

    #[test]
    fn estimator_validates_tau_and_delta() {
        let m = simple_matrix();
        let cfg = EstimatorConfig::default();
        let mut rng = stream(4);
        assert_eq!(
            estimate_inner_product(&m, 0, &[1.0, 1.0], 0.0, 0.1, &cfg, &mut rng).unwrap_err(),
            SkmError::InvalidTau { tau: 0.0 }
        );
        assert_eq!(
            estimate_inner_product(&m, 0, &[1.0, 1.0], 0.5, 1.0, &cfg, &mut rng).unwrap_err(),
            SkmError::InvalidDelta { delta: 1.0 }
        );
    }

    /// Frozen calibration example: v = (3,4), c = (1,2), <v,c> = 11,
    /// tau = 0.8, delta_share = 0.05. At least 94% of 10^4 runs must land
    /// within tau/4 = 0.2 of the truth (the guarantee promises 95%; the
    /// observed rate is far higher because the tail bound is loose).
    #[test]
    fn estimator_concentrates_on_known_inner_product() {
        let m = simple_matrix();
        let cfg = EstimatorConfig::default();
        let mut rng = stream(0xE571);
        let mut hits = 0;
        let runs = 10_000;
        for _ in 0..runs {
            let (est, used) =
                estimate_inner_product(&m, 0, &[1.0, 2.0], 0.8, 0.05, &cfg, &mut rng).unwrap();
            // K = ceil(8 ln 20) = 24 groups, N = ceil(64*25*5/0.64) = 12500.
            assert_eq!(used, 24 * 12_500);
            if (est - 11.0).abs() <= 0.2 {
                hits += 1;
            }
        }
        assert!(
            hits >= (runs * 94) / 100,
            "only {hits}/{runs} runs within tau/4 of the true inner product"
        );
    }

    #[test]
    fn approx_label_handles_zero_column_exactly() {
        let m = simple_matrix();
        let c = CentroidSet::from_rows(&[vec![1.0, 0.0], vec![3.0, 0.0]], 0).unwrap();
        let cfg = EstimatorConfig::default();
        let mut rng = stream(6);
        let r = approx_label(&m, 2, &c, 0.5, 0.2, &cfg, &mut rng).unwrap();
        assert_eq!(r.label, 0);
        assert_eq!(r.dists_sq, vec![1.0, 9.0]);
        assert_eq!(r.samples_used, 0);
    }

    #[test]
    fn approx_label_rarely_misses_by_more_than_tau() {
        let m = simple_matrix();
        // Centroids close enough that estimates matter but the gap exceeds tau.
        let c = CentroidSet::from_rows(&[vec![3.0, 3.5], vec![-3.0, -4.0]], 0).unwrap();
        let cfg = EstimatorConfig::default();
        let tau = 2.0;
        let mut rng = stream(7);
        let exact = exact_label(&m, 0, &c).unwrap();
        for _ in 0..300 {
            let r = approx_label(&m, 0, &c, tau, 0.1, &cfg, &mut rng).unwrap();
            let slack = exact.dists_sq[r.label] - exact.dists_sq[exact.label];
            assert!(
                slack <= tau,
                "sampled label missed the best squared distance by {slack} > tau"
            );
        }
    }
}
