//! Synthetic benchmark datasets: regular-simplex centers with spherical
//! Gaussian clusters, optionally margin-guarded so every point's assignment
//! gap stays above a floor.

use anyhow::{bail, Context, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use skm_core::{sq_dist, CentroidSet, SampleAccessMatrix, SkmRng};

/// `k` points in `R^d` (requires `k <= d`) forming a regular simplex centered
/// at the origin with circumradius `radius`: the standard-basis construction
/// `e_j - (1/k) * sum_i e_i` in the first `k` coordinates, rescaled.
pub fn simplex_centers(k: usize, d: usize, radius: f64) -> Result<Vec<Vec<f64>>> {
    if k == 0 || d == 0 {
        bail!("k and d must be positive, got k={k}, d={d}");
    }
    if k > d {
        bail!("the simplex construction needs k <= d, got k={k}, d={d}");
    }
    if k == 1 {
        // A single "center" at distance radius along the first axis keeps
        // norms nontrivial for single-cluster experiments.
        let mut c = vec![0.0; d];
        c[0] = radius;
        return Ok(vec![c]);
    }
    // ||e_j - mean|| = sqrt(1 - 1/k) before scaling.
    let scale = radius / (1.0 - 1.0 / k as f64).sqrt();
    let mean = 1.0 / k as f64;
    Ok((0..k)
        .map(|j| {
            let mut c = vec![0.0; d];
            for (l, slot) in c.iter_mut().enumerate().take(k) {
                *slot = if l == j {
                    scale * (1.0 - mean)
                } else {
                    -scale * mean
                };
            }
            c
        })
        .collect())
}

/// A balanced Gaussian mixture: `n / k` points per center (requires `k | n`),
/// cluster blocks contiguous (cluster `j` owns columns `j*n/k .. (j+1)*n/k`).
///
/// With `margin_floor = Some(g)`, points are redrawn until the squared
/// assignment gap `min_{j' != j} (||v - c_{j'}||^2 - ||v - c_j||^2)` is at
/// least `g`, guaranteeing a minimum relaxed-label gap in the dataset.
pub fn gaussian_mixture(
    centers: &[Vec<f64>],
    n: usize,
    sigma: f64,
    margin_floor: Option<f64>,
    rng: &mut SkmRng,
) -> Result<SampleAccessMatrix> {
    let k = centers.len();
    if k == 0 || n == 0 {
        bail!("need at least one center and one point");
    }
    if !n.is_multiple_of(k) {
        bail!("balanced mixture needs k | n, got n={n}, k={k}");
    }
    let d = centers[0].len();
    if centers.iter().any(|c| c.len() != d) {
        bail!("all centers must share one dimension");
    }
    let normal = Normal::new(0.0, sigma).context("invalid sigma")?;
    let per = n / k;
    let mut values = Vec::with_capacity(n * d);
    let mut point = vec![0.0f64; d];
    for (j, center) in centers.iter().enumerate() {
        for _ in 0..per {
            let mut attempts = 0;
            loop {
                attempts += 1;
                if attempts > 10_000 {
                    bail!(
                        "margin floor {:?} rejected 10000 consecutive draws near center {j}; \
                         it is too close to the inter-center gap",
                        margin_floor
                    );
                }
                for (x, &c) in point.iter_mut().zip(center.iter()) {
                    *x = c + normal.sample(rng);
                }
                match margin_floor {
                    None => break,
                    Some(floor) => {
                        let own = sq_dist(&point, center);
                        let gap = centers
                            .iter()
                            .enumerate()
                            .filter(|(j2, _)| *j2 != j)
                            .map(|(_, c2)| sq_dist(&point, c2) - own)
                            .fold(f64::INFINITY, f64::min);
                        if k == 1 || gap >= floor {
                            break;
                        }
                    }
                }
            }
            values.extend_from_slice(&point);
        }
    }
    Ok(SampleAccessMatrix::from_columns(d, n, values)?)
}

/// Smallest pairwise Euclidean distance between centers.
pub fn min_center_distance(centers: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, ca) in centers.iter().enumerate() {
        for cb in centers.iter().skip(a + 1) {
            best = best.min(sq_dist(ca, cb).sqrt());
        }
    }
    best
}

/// Smallest squared-distance assignment gap over the whole dataset, with
/// points labeled by their generating block: for each point, the margin by
/// which its own center beats the best rival. Requires cluster-contiguous
/// data as produced by [`gaussian_mixture`].
pub fn min_assignment_gap(m: &SampleAccessMatrix, centers: &CentroidSet) -> Result<f64> {
    let k = centers.k();
    if !m.n().is_multiple_of(k) {
        bail!("matrix is not cluster-contiguous for k={k}");
    }
    let per = m.n() / k;
    let mut min_gap = f64::INFINITY;
    for i in 0..m.n() {
        let j = i / per;
        let col = m.column(i)?;
        let own = sq_dist(col, centers.centroid(j));
        for j2 in 0..k {
            if j2 != j {
                min_gap = min_gap.min(sq_dist(col, centers.centroid(j2)) - own);
            }
        }
    }
    Ok(min_gap)
}

/// Deterministically jitter each center by a vector of Euclidean norm
/// `magnitude` (a reproducible "warm but not exact" initialization).
pub fn jitter_centers(centers: &[Vec<f64>], magnitude: f64, rng: &mut SkmRng) -> Vec<Vec<f64>> {
    centers
        .iter()
        .map(|c| {
            let dir: Vec<f64> = (0..c.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            c.iter()
                .zip(dir.iter())
                .map(|(&x, &dv)| x + magnitude * dv / norm)
                .collect()
        })
        .collect()
}
