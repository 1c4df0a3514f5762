//! Planted hard instances: clustered data hiding random bit vectors that an
//! accurate-enough centroid estimate must reveal.
//!
//! Construction (columns `i`, balanced clusters `C_j` of size `n/k`):
//!
//! * hidden bits `w_i in {0,1}^d`: first `h = floor(d/2)` bits uniform, the
//!   next `h` bits their complements, a trailing zero if `d` is odd;
//! * centered bits `wbar_i = w_i - (h/d) * ones` (orthogonal to `ones`, since
//!   every `w_i` has Hamming weight exactly `h`);
//! * `R`: the Householder reflection mapping `ones/sqrt(d)` to `e_1`, so
//!   `R wbar_i` has first coordinate 0 and the cluster skeleton survives in
//!   coordinate 1;
//! * columns `v_i = alpha * ((j+1)/k) * e_1 + alpha * R wbar_i` for `i` in
//!   cluster `j` (0-based).
//!
//! Because `R` is an involution, a centroid `c_j` folds back into the hidden
//! Hamming-weight sums: `(|C_j|/alpha) * R(c_j - planted_j)` plus the
//! un-centering shift equals `sum_{i in C_j} w_i` exactly when `c_j` is the
//! exact cluster mean, and within explicit bounds when `c_j` is `eps`-close
//! to it. The small-subset extractor pins down where those bounds must hold.

use rand::Rng;
use serde::Serialize;

use crate::centroids::CentroidSet;
use crate::cumtree::kahan_sum;
use crate::error::{Result, SkmError};
use crate::sample_access::SampleAccessMatrix;

/// A planted instance: the data, the hidden bits, and the rotation.
#[derive(Debug, Clone)]
pub struct AdversarialInstance {
    n: usize,
    d: usize,
    k: usize,
    alpha: f64,
    /// Column-major data matrix values.
    values: Vec<f64>,
    /// Hidden bit rows, one `Vec<u8>` of length `d` per column.
    hidden_bits: Vec<Vec<u8>>,
    /// Unit vector of the Householder reflection `R = I - 2 u u^T`.
    householder_u: Vec<f64>,
}

impl AdversarialInstance {
    /// Number of points.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Scale factor applied to both the skeleton and the rotated bits.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Column-major data values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Hidden bits (for verification sidecars).
    pub fn hidden_bits(&self) -> &[Vec<u8>] {
        &self.hidden_bits
    }

    /// Cluster of column `i`: columns are laid out cluster by cluster.
    pub fn cluster_of(&self, i: usize) -> usize {
        i / (self.n / self.k)
    }

    /// Points per cluster.
    pub fn cluster_size(&self) -> usize {
        self.n / self.k
    }

    /// Build the sampling-access matrix over the instance data.
    pub fn matrix(&self) -> Result<SampleAccessMatrix> {
        SampleAccessMatrix::from_columns(self.d, self.n, self.values.clone())
    }

    /// The planted skeleton centroids `alpha * ((j+1)/k) * e_1`.
    pub fn planted_centroids(&self) -> CentroidSet {
        let mut data = vec![0.0; self.k * self.d];
        for j in 0..self.k {
            data[j * self.d] = self.alpha * (j + 1) as f64 / self.k as f64;
        }
        CentroidSet::new(self.d, data, 0).expect("skeleton coordinates are finite")
    }

    /// Exact cluster means of the instance data.
    pub fn exact_centroids(&self) -> CentroidSet {
        let size = self.cluster_size();
        let mut data = Vec::with_capacity(self.k * self.d);
        for j in 0..self.k {
            let mut sum = vec![0.0f64; self.d];
            for i in j * size..(j + 1) * size {
                let col = &self.values[i * self.d..(i + 1) * self.d];
                for (s, &v) in sum.iter_mut().zip(col.iter()) {
                    *s += v;
                }
            }
            data.extend(sum.into_iter().map(|s| s / size as f64));
        }
        CentroidSet::new(self.d, data, 0).expect("means of finite data are finite")
    }

    /// Apply the instance's Householder reflection to a vector. The map is
    /// symmetric and self-inverse (`R = R^T = R^-1`).
    pub fn reflect(&self, x: &[f64]) -> Vec<f64> {
        let dot: f64 = self
            .householder_u
            .iter()
            .zip(x.iter())
            .map(|(u, v)| u * v)
            .sum();
        x.iter()
            .zip(self.householder_u.iter())
            .map(|(&v, &u)| v - 2.0 * dot * u)
            .collect()
    }

    /// Fold centroids back into hidden Hamming-weight sums.
    ///
    /// `eps_bound` is the centroid accuracy the caller wants the subset
    /// guarantee certified against (per-cluster Euclidean distance to the
    /// exact mean). With `None` it self-calibrates to the actual maximum
    /// error — floored by the rounding noise of the reconstruction
    /// arithmetic — which always yields a passing subset check and is useful
    /// for reporting only; pass the intended accuracy to test a guarantee.
    pub fn recover_hamming(
        &self,
        centroids: &CentroidSet,
        eps_bound: Option<f64>,
    ) -> Result<RecoveryReport> {
        if centroids.d() != self.d {
            return Err(SkmError::DimensionMismatch {
                expected: self.d,
                got: centroids.d(),
            });
        }
        if centroids.k() != self.k {
            return Err(SkmError::DimensionMismatch {
                expected: self.k,
                got: centroids.k(),
            });
        }
        let size = self.cluster_size() as f64;
        let h = self.d / 2;
        let planted = self.planted_centroids();
        let exact = self.exact_centroids();

        // First pass: reconstruct the per-cluster sums and their deviations
        // from the true integers.
        let mut sums_est = Vec::with_capacity(self.k);
        let mut sums_true = Vec::with_capacity(self.k);
        let mut cluster_devs = Vec::with_capacity(self.k);
        let mut rounded_match = true;
        let mut max_abs_dev = 0.0f64;

        for j in 0..self.k {
            let dev: Vec<f64> = centroids
                .centroid(j)
                .iter()
                .zip(planted.centroid(j).iter())
                .map(|(c, p)| c - p)
                .collect();
            let y = self.reflect(&dev);
            let est: Vec<f64> = y
                .iter()
                .map(|v| (size / self.alpha) * v + size * h as f64 / self.d as f64)
                .collect();

            let truth: Vec<u64> = (0..self.d)
                .map(|l| {
                    (j * self.cluster_size()..(j + 1) * self.cluster_size())
                        .map(|i| self.hidden_bits[i][l] as u64)
                        .sum()
                })
                .collect();

            let devs: Vec<f64> = est
                .iter()
                .zip(truth.iter())
                .map(|(&e, &t)| e - t as f64)
                .collect();
            for &dv in &devs {
                max_abs_dev = max_abs_dev.max(dv.abs());
                if dv.abs() >= 0.5 {
                    rounded_match = false;
                }
            }

            sums_est.push(est);
            sums_true.push(truth);
            cluster_devs.push(devs);
        }

        // Self-calibration takes the measured geometric centroid error,
        // floored by the epsilon implied by the observed first-half l1
        // masses: the reconstruction arithmetic rounds in f64, so even exact
        // centroids leave a few ulps of deviation that a zero budget would
        // spuriously reject.
        let eps_used = eps_bound.unwrap_or_else(|| {
            let geometric = (0..self.k)
                .map(|j| {
                    centroids
                        .centroid(j)
                        .iter()
                        .zip(exact.centroid(j).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max);
            let implied = cluster_devs
                .iter()
                .map(|devs| {
                    let first_half = &devs[..h.max(1).min(devs.len())];
                    let l1 = kahan_sum(first_half.iter().map(|v| v.abs()));
                    l1 * self.alpha / ((first_half.len() as f64).sqrt() * size)
                })
                .fold(0.0, f64::max);
            geometric.max(implied)
        });

        let subset_bound =
            4.0 * self.n as f64 * eps_used / (self.alpha * self.k as f64 * (self.d as f64).sqrt());

        // Second pass: the subset guarantee on the first-half coordinates,
        // whose l1 mass is at most sqrt(h) * (|C_j|/alpha) * eps.
        let mut subsets = Vec::with_capacity(self.k);
        let mut subset_ok = true;
        for devs in &cluster_devs {
            let first_half = &devs[..h.max(1).min(devs.len())];
            let budget = (first_half.len() as f64).sqrt() * size * eps_used / self.alpha;
            match extract_small_subset(first_half, budget) {
                Ok(subset) => {
                    let want = self.d / 4;
                    let all_small = subset.iter().all(|&l| devs[l].abs() <= subset_bound);
                    if subset.len() < want.max(1) || !all_small {
                        subset_ok = false;
                    }
                    subsets.push(subset);
                }
                Err(SkmError::BudgetViolated { .. }) => {
                    subset_ok = false;
                    subsets.push(Vec::new());
                }
                Err(e) => return Err(e),
            }
        }

        Ok(RecoveryReport {
            sums_est,
            sums_true,
            rounded_match,
            max_abs_dev,
            eps_used,
            subset_bound,
            subsets,
            subset_ok,
        })
    }
}

/// Result of folding centroids back into hidden bit sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    /// Recovered per-cluster Hamming-weight sums (one vector per cluster).
    pub sums_est: Vec<Vec<f64>>,
    /// True per-cluster Hamming-weight sums.
    pub sums_true: Vec<Vec<u64>>,
    /// True when every recovered sum rounds to the true integer.
    pub rounded_match: bool,
    /// Largest absolute deviation across all clusters and coordinates.
    pub max_abs_dev: f64,
    /// The centroid-accuracy bound the subset check was certified against.
    pub eps_used: f64,
    /// Per-coordinate deviation bound `4 n eps / (alpha k sqrt(d))` that the
    /// extracted subsets are checked against.
    pub subset_bound: f64,
    /// Per-cluster extracted coordinate subsets (first-half coordinates).
    pub subsets: Vec<Vec<usize>>,
    /// True when every cluster yielded a subset of at least `floor(d/4)`
    /// coordinates, all within `subset_bound`.
    pub subset_ok: bool,
}

/// Build a planted instance. Requires `d >= 2`, `k >= 1`, `k | n`, and a
/// positive finite `alpha`.
pub fn build_instance<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    d: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<AdversarialInstance> {
    if k == 0 || n == 0 || !n.is_multiple_of(k) {
        return Err(SkmError::InvalidShape {
            reason: format!("k must divide n, got n={n}, k={k}"),
        });
    }
    if d < 2 {
        return Err(SkmError::InvalidShape {
            reason: format!("dimension must be at least 2, got {d}"),
        });
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(SkmError::InvalidShape {
            reason: format!("alpha must be positive and finite, got {alpha}"),
        });
    }

    let h = d / 2;
    let df = d as f64;
    // Householder vector for the reflection mapping ones/sqrt(d) -> e_1.
    let inv_sqrt_d = 1.0 / df.sqrt();
    let mut u: Vec<f64> = vec![inv_sqrt_d; d];
    u[0] -= 1.0;
    let u_norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in u.iter_mut() {
        *v /= u_norm;
    }

    let size = n / k;
    let mut values = Vec::with_capacity(n * d);
    let mut hidden_bits = Vec::with_capacity(n);
    let shift = h as f64 / df;
    for i in 0..n {
        let j = i / size;
        let mut bits = vec![0u8; d];
        for l in 0..h {
            let b: bool = rng.random();
            bits[l] = b as u8;
            bits[h + l] = 1 - bits[l];
        }
        // Odd d leaves the final bit at 0.
        let wbar: Vec<f64> = bits.iter().map(|&b| b as f64 - shift).collect();
        // Reflect: R x = x - 2 <u, x> u.
        let dot: f64 = u.iter().zip(wbar.iter()).map(|(a, b)| a * b).sum();
        let skeleton = alpha * (j + 1) as f64 / k as f64;
        for l in 0..d {
            let rot = wbar[l] - 2.0 * dot * u[l];
            let mut v = alpha * rot;
            if l == 0 {
                v += skeleton;
            }
            values.push(v);
        }
        hidden_bits.push(bits);
    }

    Ok(AdversarialInstance {
        n,
        d,
        k,
        alpha,
        values,
        hidden_bits,
        householder_u: u,
    })
}

/// From a deviation vector with `||x||_1 <= eps_budget`, extract the
/// `ceil(len/2)` smallest-magnitude coordinates; each satisfies
/// `|x_i| <= 2 eps_budget / len`. Errors with [`SkmError::BudgetViolated`]
/// when the l1 mass exceeds the stated budget.
pub fn extract_small_subset(x: &[f64], eps_budget: f64) -> Result<Vec<usize>> {
    if x.is_empty() {
        return Err(SkmError::InvalidParams {
            reason: "cannot extract a subset from an empty vector".into(),
        });
    }
    if !(eps_budget >= 0.0) || !eps_budget.is_finite() {
        return Err(SkmError::InvalidParams {
            reason: format!("eps_budget must be nonnegative and finite, got {eps_budget}"),
        });
    }
    let l1 = kahan_sum(x.iter().map(|v| v.abs()));
    if l1 > eps_budget {
        return Err(SkmError::BudgetViolated {
            l1,
            budget: eps_budget,
        });
    }
    let m = x.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()).then(a.cmp(&b)));
    let take = m.div_ceil(2);
    let mut subset: Vec<usize> = order.into_iter().take(take).collect();
    subset.sort_unstable();
    debug_assert!(subset
        .iter()
        .all(|&i| x[i].abs() <= 2.0 * eps_budget / m as f64 + f64::EPSILON * eps_budget));
    Ok(subset)
}
