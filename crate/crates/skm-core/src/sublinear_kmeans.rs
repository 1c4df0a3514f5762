//! Sampled k-means iterations with sublinear per-iteration cost.
//!
//! One relaxed iteration replaces both halves of a Lloyd step with sampling:
//!
//! * **Cluster masses**: a uniform multiset `P` of `p` column indices
//!   estimates each cluster's share of the points; the update scales by
//!   `lambda_j = p / (n * |P_j|)` instead of `1 / |C_j|`.
//! * **Cluster sums**: a weighted multiset `Q` estimates each cluster's
//!   coordinate sum. In exact-assignment mode `Q` holds column indices drawn
//!   proportional to column norms and the update averages `v_i / ||v_i||`
//!   rescaled by `norm_21 / q`. In sampled-assignment mode `Q` holds (column,
//!   row) pairs drawn proportional to absolute entries and the update
//!   averages entry signs rescaled by `norm_11 / q`, so a single iteration
//!   never needs a full pass over coordinates either.
//!
//! Labels are computed once per distinct sampled column: exactly in
//! exact-assignment mode, and within `tau` (squared distance, with a
//! per-call failure budget `delta / (4 (p + q))`) in sampled-assignment mode.
//! A cluster that catches no `P` draws keeps its previous centroid and is
//! flagged in the report; that is a recovery rule, not an error.
//!
//! Everything is deterministic given `(data, params, rng state)`: per-column
//! estimator streams are derived from a seed drawn once per iteration, so
//! results do not depend on thread count.

use std::time::Instant;

use rayon::prelude::*;

use crate::assignment::{approx_label, exact_label_of, EstimatorConfig, LabelResult};
use crate::centroids::CentroidSet;
use crate::error::{Result, SkmError};
use crate::rng::{substream, SkmRng, TAG_ITERATION, TAG_LABEL};
use crate::sample_access::{MatrixNorms, SampleAccessMatrix, SpectralMode};

/// How labels are computed inside an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignMode {
    /// Exact labels for sampled columns; `Q` samples whole columns.
    Exact,
    /// Labels correct up to `tau` in squared distance; `Q` samples entries.
    Sampled,
}

/// Parameters of a sampled iteration (and of a multi-iteration run).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationParams {
    /// Per-centroid accuracy target for the update (distance to the exact
    /// Lloyd centroid).
    pub epsilon: f64,
    /// Assignment slack in squared distance. Must be 0 in exact mode and
    /// positive in sampled mode.
    pub tau: f64,
    /// Failure budget for the iteration, in (0, 1).
    pub delta: f64,
    /// Stop a run once the mean centroid shift drops to this value.
    pub shift_threshold: f64,
    /// Maximum number of iterations in a run.
    pub max_iters: u32,
    /// Multiplier in the `p` (uniform sample) size formula.
    pub const_p: f64,
    /// Multiplier in the `q` (weighted sample) size formula.
    pub const_q: f64,
    /// Median-of-means group-count multiplier (sampled mode).
    pub mm_groups: f64,
    /// Median-of-means group-size multiplier (sampled mode).
    pub mm_group_size: f64,
    /// Label mode.
    pub mode: AssignMode,
    /// Base seed; per-iteration and per-label streams derive from it.
    pub seed: u64,
    /// Zero-noise mode for equivalence testing: exact labels for every
    /// column and enumeration means in place of sampled sums, which makes
    /// the update coincide with an exact Lloyd step.
    pub oracle: bool,
    /// Force the uniform sample size instead of the formula value.
    pub p_override: Option<usize>,
    /// Force the weighted sample size instead of the formula value.
    pub q_override: Option<usize>,
    /// How the spectral upper bound entering the `p` formula is computed.
    pub spectral: SpectralMode,
}

impl Default for IterationParams {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            tau: 0.0,
            delta: 0.1,
            shift_threshold: 1e-3,
            max_iters: 20,
            const_p: 48.0,
            const_q: 192.0,
            mm_groups: 8.0,
            mm_group_size: 64.0,
            mode: AssignMode::Exact,
            seed: 0,
            oracle: false,
            p_override: None,
            q_override: None,
            spectral: SpectralMode::FrobeniusUpper,
        }
    }
}

impl IterationParams {
    /// Check internal consistency. `tau` must be positive exactly when the
    /// mode samples assignments.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(SkmError::InvalidParams {
                reason: format!("epsilon must be positive and finite, got {}", self.epsilon),
            });
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SkmError::InvalidDelta { delta: self.delta });
        }
        if !(self.shift_threshold >= 0.0) || !self.shift_threshold.is_finite() {
            return Err(SkmError::InvalidParams {
                reason: format!(
                    "shift_threshold must be nonnegative, got {}",
                    self.shift_threshold
                ),
            });
        }
        if self.max_iters == 0 {
            return Err(SkmError::InvalidParams {
                reason: "max_iters must be at least 1".into(),
            });
        }
        for (name, v) in [
            ("const_p", self.const_p),
            ("const_q", self.const_q),
            ("mm_groups", self.mm_groups),
            ("mm_group_size", self.mm_group_size),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SkmError::InvalidParams {
                    reason: format!("{name} must be positive and finite, got {v}"),
                });
            }
        }
        match self.mode {
            AssignMode::Exact => {
                if self.tau != 0.0 {
                    return Err(SkmError::InvalidParams {
                        reason: format!("exact mode requires tau = 0, got {}", self.tau),
                    });
                }
            }
            AssignMode::Sampled => {
                if !(self.tau > 0.0) || !self.tau.is_finite() {
                    return Err(SkmError::InvalidTau { tau: self.tau });
                }
            }
        }
        Ok(())
    }

    fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            groups_factor: self.mm_groups,
            group_size_factor: self.mm_group_size,
            oracle: false,
        }
    }
}

/// Sample sizes for one iteration, before and after clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSizes {
    /// Uniform sample size, clamped to `[1, n]`.
    pub p: usize,
    /// Weighted sample size, clamped to `[1, n * d]`.
    pub q: usize,
    /// Formula value of `p` before ceil/clamp.
    pub p_raw: f64,
    /// Formula value of `q` before ceil/clamp.
    pub q_raw: f64,
}

/// Evaluate the sample-size formulas:
///
/// ```text
/// p = ceil( const_p * (S^2 / n) * (k^2 / eps^2) * ln(2k / delta) )
/// q = ceil( const_q * max{ (B^2/n^2)(k^2/eps^2), (B/n)(k/eps) } * ln(k / delta) )
/// ```
///
/// where `S` is the spectral upper bound and `B` is `norm_21` in exact mode
/// or `norm_11` in sampled mode. Both sizes are clamped (`p` to `[1, n]`,
/// `q` to `[1, n*d]`); the raw values are reported alongside.
pub fn sample_sizes(
    norms: &MatrixNorms,
    n: usize,
    d: usize,
    k: usize,
    params: &IterationParams,
) -> Result<SampleSizes> {
    params.validate()?;
    if k == 0 {
        return Err(SkmError::InvalidParams {
            reason: "k must be positive".into(),
        });
    }
    let nf = n as f64;
    let kf = k as f64;
    let eps = params.epsilon;
    let s = norms.spectral_upper;
    let p_raw =
        params.const_p * (s * s / nf) * (kf * kf / (eps * eps)) * (2.0 * kf / params.delta).ln();
    let base = match params.mode {
        AssignMode::Exact => norms.norm_21,
        AssignMode::Sampled => norms.norm_11,
    };
    let q_raw = params.const_q
        * f64::max(
            (base * base / (nf * nf)) * (kf * kf / (eps * eps)),
            (base / nf) * (kf / eps),
        )
        * (kf / params.delta).ln();
    if p_raw.is_nan() || q_raw.is_nan() {
        return Err(SkmError::InvalidParams {
            reason: "sample-size formula produced NaN (check norms)".into(),
        });
    }
    let p = p_raw.ceil().clamp(1.0, nf) as usize;
    let q = q_raw.ceil().clamp(1.0, (n * d) as f64) as usize;
    Ok(SampleSizes { p, q, p_raw, q_raw })
}

/// Everything observed during one sampled iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    /// The updated centroids (iteration counter advanced by one).
    pub new_centroids: CentroidSet,
    /// Uniform sample size used.
    pub p_used: usize,
    /// Weighted sample size used.
    pub q_used: usize,
    /// Multiset count of `P` draws landing in each cluster (exact cluster
    /// sizes in oracle mode).
    pub per_cluster_p: Vec<u64>,
    /// Multiset count of `Q` draws landing in each cluster (exact cluster
    /// sizes in oracle mode).
    pub per_cluster_q: Vec<u64>,
    /// Clusters that caught no `P` draws and kept their previous centroid.
    pub empty_clusters: Vec<usize>,
    /// Mean per-centroid distance between old and new centroids.
    pub centroid_shift: f64,
    /// Distinct columns that were labeled.
    pub labels_computed: u64,
    /// Estimator samples drawn by relaxed labeling (0 in exact mode).
    pub estimator_samples: u64,
    /// Matrix entry reads performed by this iteration (tallied locally, so
    /// the number is exact even when other work shares the matrix).
    pub entry_reads: u64,
    /// Logical random draws: `p + q` index draws plus estimator samples.
    pub rng_draws: u64,
    /// Wall-clock time of the iteration.
    pub wall_nanos: Option<u64>,
}

/// Trajectory of a multi-iteration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Per-iteration reports, in order.
    pub iterations: Vec<IterationReport>,
    /// True when the run stopped because the mean centroid shift reached the
    /// threshold; false when it exhausted `max_iters` (not an error).
    pub converged: bool,
}

impl Trajectory {
    /// Centroids after the last iteration.
    pub fn final_centroids(&self) -> &CentroidSet {
        &self
            .iterations
            .last()
            .expect("a trajectory holds at least one iteration")
            .new_centroids
    }
}

/// One exact-assignment sampled iteration (`tau = 0`).
///
/// `P` is uniform over columns; `Q` draws columns proportional to their
/// norms; every distinct sampled column gets an exact label; the update is
/// `lambda_j * sum_{i in Q_j} (norm_21 / q) * v_i / ||v_i||` with
/// multiplicity.
pub fn iterate_eps0(
    m: &SampleAccessMatrix,
    c: &CentroidSet,
    params: &IterationParams,
    rng: &mut SkmRng,
) -> Result<IterationReport> {
    params.validate()?;
    if params.mode != AssignMode::Exact {
        return Err(SkmError::InvalidParams {
            reason: "iterate_eps0 requires exact assignment mode".into(),
        });
    }
    check_dims(m, c)?;
    let started = Instant::now();
    let norms = m.norms(params.spectral)?;
    let sizes = sample_sizes(&norms, m.n(), m.d(), c.k(), params)?;
    let p = params.p_override.unwrap_or(sizes.p);
    let q = params.q_override.unwrap_or(sizes.q);

    if params.oracle {
        return oracle_iterate(m, c, p, q, OracleUpdate::NormalizedColumns, started);
    }

    let d = m.d();
    let k = c.k();

    let mut p_draws: Vec<u32> = (0..p)
        .map(|_| m.sample_column_uniform(rng) as u32)
        .collect();
    let mut q_draws: Vec<u32> = Vec::with_capacity(q);
    for _ in 0..q {
        q_draws.push(m.sample_column_by_norm(rng)? as u32);
    }
    let rng_draws = (p + q) as u64;
    p_draws.sort_unstable();
    q_draws.sort_unstable();

    let mut per_cluster_p = vec![0u64; k];
    let mut per_cluster_q = vec![0u64; k];
    let mut acc = vec![0.0f64; k * d];
    let mut labels_computed = 0u64;
    let mut entry_reads = 0u64;
    let scale = norms.norm_21 / q as f64;

    let mut ip = 0usize;
    let mut iq = 0usize;
    while ip < p_draws.len() || iq < q_draws.len() {
        let col = match (p_draws.get(ip), q_draws.get(iq)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        let mut pcount = 0u64;
        while ip < p_draws.len() && p_draws[ip] == col {
            pcount += 1;
            ip += 1;
        }
        let mut qcount = 0u64;
        while iq < q_draws.len() && q_draws[iq] == col {
            qcount += 1;
            iq += 1;
        }
        let col_data = m.column(col as usize)?;
        entry_reads += d as u64;
        labels_computed += 1;
        let label = exact_label_of(col_data, c).label;
        per_cluster_p[label] += pcount;
        if qcount > 0 {
            per_cluster_q[label] += qcount;
            let coef = qcount as f64 * scale / m.col_norm(col as usize)?;
            let dst = &mut acc[label * d..(label + 1) * d];
            for (a, &v) in dst.iter_mut().zip(col_data.iter()) {
                *a += coef * v;
            }
        }
    }

    finalize_iteration(
        m,
        c,
        params,
        p,
        q,
        per_cluster_p,
        per_cluster_q,
        acc,
        labels_computed,
        0,
        entry_reads,
        rng_draws,
        started,
    )
}

/// One sampled-assignment iteration (`tau > 0`).
///
/// `P` is uniform over columns; `Q` draws (column, row) pairs proportional to
/// absolute entries; every distinct sampled column gets a relaxed label with
/// per-call failure budget `delta / (4 (p + q))`; the per-coordinate update
/// is `lambda_j * (norm_11 / q) * sum of entry signs` with multiplicity.
pub fn iterate_epstau(
    m: &SampleAccessMatrix,
    c: &CentroidSet,
    params: &IterationParams,
    rng: &mut SkmRng,
) -> Result<IterationReport> {
    params.validate()?;
    if params.mode != AssignMode::Sampled {
        return Err(SkmError::InvalidParams {
            reason: "iterate_epstau requires sampled assignment mode".into(),
        });
    }
    check_dims(m, c)?;
    let started = Instant::now();
    let norms = m.norms(params.spectral)?;
    let sizes = sample_sizes(&norms, m.n(), m.d(), c.k(), params)?;
    let p = params.p_override.unwrap_or(sizes.p);
    let q = params.q_override.unwrap_or(sizes.q);

    if params.oracle {
        return oracle_iterate(m, c, p, q, OracleUpdate::EntrySums, started);
    }

    let d = m.d();
    let k = c.k();

    let mut p_draws: Vec<u32> = (0..p)
        .map(|_| m.sample_column_uniform(rng) as u32)
        .collect();
    let mut q_pairs: Vec<(u32, u32)> = Vec::with_capacity(q);
    for _ in 0..q {
        let (i, l) = m.sample_entry(rng)?;
        q_pairs.push((i as u32, l as u32));
    }
    let label_seed = rand::RngCore::next_u64(rng);
    let mut rng_draws = (p + q) as u64;

    p_draws.sort_unstable();
    let mut q_cols: Vec<u32> = q_pairs.iter().map(|&(i, _)| i).collect();
    q_cols.sort_unstable();

    // Distinct columns needing a label: union of P columns and Q columns.
    let mut distinct: Vec<u32> = Vec::with_capacity(p_draws.len() + q_cols.len());
    distinct.extend_from_slice(&p_draws);
    distinct.extend_from_slice(&q_cols);
    distinct.sort_unstable();
    distinct.dedup();

    // Relaxed labels, one stream per column so the result is independent of
    // the parallel schedule.
    let call_delta = params.delta / (4.0 * (p + q) as f64);
    let cfg = params.estimator_config();
    let labels: Vec<(usize, u64, u64)> = distinct
        .par_iter()
        .map(|&col| {
            let mut col_rng = substream(label_seed, TAG_LABEL, col as u64);
            let r: LabelResult = approx_label(
                m,
                col as usize,
                c,
                params.tau,
                call_delta,
                &cfg,
                &mut col_rng,
            )?;
            // Labeling fetches the column once, except for the zero-column
            // shortcut which needs no entries at all.
            let col_reads = if m.col_sq_norm(col as usize)? > 0.0 {
                d as u64
            } else {
                0
            };
            Ok((r.label, r.samples_used, col_reads))
        })
        .collect::<Result<Vec<_>>>()?;

    let estimator_samples: u64 = labels.iter().map(|&(_, s, _)| s).sum();
    rng_draws += estimator_samples;
    let labels_computed = distinct.len() as u64;
    let mut entry_reads: u64 = labels.iter().map(|&(_, _, r)| r).sum();

    let label_of = |col: u32| -> usize {
        let pos = distinct.binary_search(&col).expect("labeled column");
        labels[pos].0
    };

    let mut per_cluster_p = vec![0u64; k];
    for &col in &p_draws {
        per_cluster_p[label_of(col)] += 1;
    }

    let mut per_cluster_q = vec![0u64; k];
    let mut sign_sums = vec![0i64; k * d];
    for &(i, l) in &q_pairs {
        let j = label_of(i);
        per_cluster_q[j] += 1;
        let v = m.entry(i as usize, l as usize)?;
        entry_reads += 1;
        sign_sums[j * d + l as usize] += if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        };
    }

    let scale = norms.norm_11 / q as f64;
    let mut acc = vec![0.0f64; k * d];
    for (a, &s) in acc.iter_mut().zip(sign_sums.iter()) {
        *a = scale * s as f64;
    }

    finalize_iteration(
        m,
        c,
        params,
        p,
        q,
        per_cluster_p,
        per_cluster_q,
        acc,
        labels_computed,
        estimator_samples,
        entry_reads,
        rng_draws,
        started,
    )
}

/// Dispatch on the parameter mode.
pub fn iterate(
    m: &SampleAccessMatrix,
    c: &CentroidSet,
    params: &IterationParams,
    rng: &mut SkmRng,
) -> Result<IterationReport> {
    match params.mode {
        AssignMode::Exact => iterate_eps0(m, c, params, rng),
        AssignMode::Sampled => iterate_epstau(m, c, params, rng),
    }
}

/// Run sampled iterations from `init` until the mean centroid shift reaches
/// `shift_threshold` or `max_iters` is exhausted. Per-iteration randomness is
/// derived from `params.seed`, so a run is reproducible as a whole.
pub fn run(
    m: &SampleAccessMatrix,
    init: &CentroidSet,
    params: &IterationParams,
) -> Result<Trajectory> {
    params.validate()?;
    check_dims(m, init)?;
    let mut current = init.clone();
    let mut iterations = Vec::new();
    let mut converged = false;
    for t in 0..params.max_iters {
        let mut rng = substream(params.seed, TAG_ITERATION, t as u64);
        let report = iterate(m, &current, params, &mut rng)?;
        current = report.new_centroids.clone();
        let shift = report.centroid_shift;
        iterations.push(report);
        if shift <= params.shift_threshold {
            converged = true;
            break;
        }
    }
    Ok(Trajectory {
        iterations,
        converged,
    })
}

/// Which enumeration the oracle update uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleUpdate {
    /// Expectation of the norm-weighted column sample: `sum_{i in C_j} v_i`.
    NormalizedColumns,
    /// Expectation of the sign-of-entry sample: identical sums, reached via
    /// the entry-sampling identity.
    EntrySums,
}

/// Zero-noise iteration: exact labels for all columns, exact expectations in
/// place of both sampled quantities. With `|P_j| := p |C_j| / n` the scaling
/// telescopes and the update equals an exact Lloyd step (up to f64 rounding
/// of the factored arithmetic). Reports exact cluster sizes in the per-cluster
/// fields and zero random draws.
fn oracle_iterate(
    m: &SampleAccessMatrix,
    c: &CentroidSet,
    p: usize,
    q: usize,
    update: OracleUpdate,
    started: Instant,
) -> Result<IterationReport> {
    let n = m.n();
    let d = m.d();
    let k = c.k();
    let mut counts = vec![0u64; k];
    let mut acc = vec![0.0f64; k * d];
    for i in 0..n {
        let col = m.column(i)?;
        let label = exact_label_of(col, c).label;
        counts[label] += 1;
        let dst = &mut acc[label * d..(label + 1) * d];
        match update {
            // Both enumerations reduce to plain per-cluster coordinate sums;
            // they differ only in which sampled estimator they de-noise.
            OracleUpdate::NormalizedColumns | OracleUpdate::EntrySums => {
                for (a, &v) in dst.iter_mut().zip(col.iter()) {
                    *a += v;
                }
            }
        }
    }

    let pf = p as f64;
    let nf = n as f64;
    let mut data = Vec::with_capacity(k * d);
    let mut empty_clusters = Vec::new();
    for j in 0..k {
        if counts[j] == 0 {
            empty_clusters.push(j);
            data.extend_from_slice(c.centroid(j));
            continue;
        }
        // The exact expectation of |P_j| is p |C_j| / n; pushing it through
        // the lambda formula reproduces 1 / |C_j| exactly in exact arithmetic.
        let p_j = pf * counts[j] as f64 / nf;
        let lambda = pf / (nf * p_j);
        data.extend(acc[j * d..(j + 1) * d].iter().map(|a| lambda * a));
    }
    let new_centroids = CentroidSet::new(d, data, c.iteration + 1)?;
    let centroid_shift = c.mean_shift(&new_centroids)?;
    Ok(IterationReport {
        new_centroids,
        p_used: p,
        q_used: q,
        per_cluster_p: counts.clone(),
        per_cluster_q: counts,
        empty_clusters,
        centroid_shift,
        labels_computed: n as u64,
        estimator_samples: 0,
        entry_reads: (n * d) as u64,
        rng_draws: 0,
        wall_nanos: Some(started.elapsed().as_nanos() as u64),
    })
}

/// Shared tail of both sampled iterations: scale the accumulated sums by
/// `lambda_j`, freeze clusters with no `P` mass, and assemble the report.
#[allow(clippy::too_many_arguments)]
fn finalize_iteration(
    m: &SampleAccessMatrix,
    c: &CentroidSet,
    _params: &IterationParams,
    p: usize,
    q: usize,
    per_cluster_p: Vec<u64>,
    per_cluster_q: Vec<u64>,
    acc: Vec<f64>,
    labels_computed: u64,
    estimator_samples: u64,
    entry_reads: u64,
    rng_draws: u64,
    started: Instant,
) -> Result<IterationReport> {
    let d = m.d();
    let k = c.k();
    let nf = m.n() as f64;
    let pf = p as f64;
    let mut data = Vec::with_capacity(k * d);
    let mut empty_clusters = Vec::new();
    for j in 0..k {
        if per_cluster_p[j] == 0 {
            empty_clusters.push(j);
            data.extend_from_slice(c.centroid(j));
            continue;
        }
        let lambda = pf / (nf * per_cluster_p[j] as f64);
        data.extend(acc[j * d..(j + 1) * d].iter().map(|a| lambda * a));
    }
    let new_centroids = CentroidSet::new(d, data, c.iteration + 1)?;
    let centroid_shift = c.mean_shift(&new_centroids)?;
    Ok(IterationReport {
        new_centroids,
        p_used: p,
        q_used: q,
        per_cluster_p,
        per_cluster_q,
        empty_clusters,
        centroid_shift,
        labels_computed,
        estimator_samples,
        entry_reads,
        rng_draws,
        wall_nanos: Some(started.elapsed().as_nanos() as u64),
    })
}

fn check_dims(m: &SampleAccessMatrix, c: &CentroidSet) -> Result<()> {
    if c.d() != m.d() {
        return Err(SkmError::DimensionMismatch {
            expected: m.d(),
            got: c.d(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::lloyd_iterate;
    use crate::rng::stream;

    fn exact_params() -> IterationParams {
        IterationParams {
            epsilon: 0.5,
            delta: 0.1,
            ..IterationParams::default()
        }
    }

    fn sampled_params(tau: f64) -> IterationParams {
        IterationParams {
            tau,
            mode: AssignMode::Sampled,
            ..exact_params()
        }
    }

    /// Two tight triples on the line: clusters {0, 0.5, 1} and {10, 10.5, 11}.
    fn six_points() -> SampleAccessMatrix {
        SampleAccessMatrix::from_columns(1, 6, vec![0.0, 0.5, 1.0, 10.0, 10.5, 11.0]).unwrap()
    }

    fn six_point_centroids() -> CentroidSet {
        CentroidSet::from_rows(&[vec![0.2], vec![10.2]], 0).unwrap()
    }

    #[test]
    // The frozen constants keep every digit of the independent computation,
    // even where f64 would round identically with fewer.
    #[allow(clippy::excessive_precision)]
    fn sample_size_formulas_match_frozen_arithmetic() {
        // S^2 = 125, n = 2, d = 2, k = 2, eps = 1, delta = 0.1, norm_21 = 15.
        let norms = MatrixNorms {
            spectral_upper: 125.0f64.sqrt(),
            frobenius: 125.0f64.sqrt(),
            norm_21: 15.0,
            norm_11: 20.0,
            norm_2inf: 10.0,
            mode: SpectralMode::FrobeniusUpper,
        };
        let params = IterationParams {
            epsilon: 1.0,
            delta: 0.1,
            ..IterationParams::default()
        };
        let sizes = sample_sizes(&norms, 2, 2, 2, &params).unwrap();
        // p_raw = 48 * 62.5 * 4 * ln(40) = 12000 * 3.6888794541139363.
        assert!((sizes.p_raw - 44266.553449367236).abs() < 1e-6);
        assert_eq!(sizes.p_raw.ceil() as u64, 44267);
        assert_eq!(sizes.p, 2, "p clamps to n");
        // q_raw = 192 * max{(225/4)*4, (15/2)*2} * ln(20)
        //       = 192 * 225 * 2.995732273553991.
        assert!((sizes.q_raw - 129415.63421753242).abs() < 1e-6);
        assert_eq!(sizes.q, 4, "q clamps to n*d");
    }

    #[test]
    fn sample_sizes_switch_base_norm_with_mode() {
        let norms = MatrixNorms {
            spectral_upper: 1.0,
            frobenius: 1.0,
            norm_21: 10.0,
            norm_11: 40.0,
            norm_2inf: 1.0,
            mode: SpectralMode::FrobeniusUpper,
        };
        let exact = sample_sizes(&norms, 1000, 4, 2, &exact_params()).unwrap();
        let sampled = sample_sizes(&norms, 1000, 4, 2, &sampled_params(0.5)).unwrap();
        assert!(sampled.q_raw > exact.q_raw, "entrywise base norm is larger");
    }

    #[test]
    fn params_validation_rejects_inconsistent_tau() {
        let mut p = exact_params();
        p.tau = 0.5;
        assert!(p.validate().is_err());
        let mut p = sampled_params(0.0);
        p.tau = 0.0;
        assert!(p.validate().is_err());
        assert!(sampled_params(0.5).validate().is_ok());
    }

    #[test]
    fn oracle_mode_reproduces_lloyd_exactly_enough() {
        let m = six_points();
        let c = six_point_centroids();
        let lloyd = lloyd_iterate(&m, &c).unwrap();
        for params in [
            IterationParams {
                oracle: true,
                ..exact_params()
            },
            IterationParams {
                oracle: true,
                ..sampled_params(0.5)
            },
        ] {
            let mut rng = stream(1);
            let rep = iterate(&m, &c, &params, &mut rng).unwrap();
            for j in 0..2 {
                let got = rep.new_centroids.centroid(j)[0];
                let want = lloyd.centroid(j)[0];
                assert!(
                    (got - want).abs() <= 1e-9 * want.abs().max(1.0),
                    "cluster {j}: oracle {got} vs lloyd {want}"
                );
            }
            assert_eq!(rep.per_cluster_p, vec![3, 3]);
            assert_eq!(rep.rng_draws, 0);
        }
    }

    /// Unbiasedness of the exact-assignment update: over 200 trials with
    /// large forced samples, the mean estimated centroid must sit within
    /// three standard errors of the exact Lloyd centroid.
    #[test]
    fn eps0_update_is_unbiased_within_three_standard_errors() {
        let m = six_points();
        let c = six_point_centroids();
        let lloyd = lloyd_iterate(&m, &c).unwrap();
        let params = IterationParams {
            p_override: Some(10_000),
            q_override: Some(10_000),
            ..exact_params()
        };
        let trials = 200;
        let mut estimates: Vec<Vec<f64>> = vec![Vec::new(); 2];
        for t in 0..trials {
            let mut rng = stream(0xAB5E + t as u64);
            let rep = iterate_eps0(&m, &c, &params, &mut rng).unwrap();
            for (j, series) in estimates.iter_mut().enumerate() {
                series.push(rep.new_centroids.centroid(j)[0]);
            }
        }
        for (j, series) in estimates.iter().enumerate() {
            let mean: f64 = series.iter().sum::<f64>() / trials as f64;
            let var: f64 =
                series.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (trials as f64 - 1.0);
            let se = (var / trials as f64).sqrt();
            let target = lloyd.centroid(j)[0];
            assert!(
                (mean - target).abs() <= 3.0 * se + 1e-9,
                "cluster {j}: mean {mean} vs lloyd {target}, se {se}"
            );
        }
    }

    #[test]
    fn empty_cluster_keeps_centroid_and_is_flagged() {
        let m = six_points();
        // Second centroid is far from every point: no P draw can label it.
        let c = CentroidSet::from_rows(&[vec![5.0], vec![1000.0]], 0).unwrap();
        let params = IterationParams {
            p_override: Some(500),
            q_override: Some(500),
            ..exact_params()
        };
        let mut rng = stream(3);
        let rep = iterate_eps0(&m, &c, &params, &mut rng).unwrap();
        assert_eq!(rep.empty_clusters, vec![1]);
        assert_eq!(rep.new_centroids.centroid(1), &[1000.0]);
        assert_eq!(rep.per_cluster_p[1], 0);
    }

    #[test]
    fn epstau_update_approaches_lloyd_with_large_samples() {
        let m = six_points();
        let c = six_point_centroids();
        let lloyd = lloyd_iterate(&m, &c).unwrap();
        let params = IterationParams {
            p_override: Some(20_000),
            q_override: Some(20_000),
            ..sampled_params(0.5)
        };
        let mut rng = stream(4);
        let rep = iterate_epstau(&m, &c, &params, &mut rng).unwrap();
        for j in 0..2 {
            let got = rep.new_centroids.centroid(j)[0];
            let want = lloyd.centroid(j)[0];
            assert!(
                (got - want).abs() < 0.35,
                "cluster {j}: sampled {got} too far from lloyd {want}"
            );
        }
        assert!(rep.estimator_samples > 0);
    }

    #[test]
    fn iterations_are_deterministic_given_seed() {
        let m = six_points();
        let c = six_point_centroids();
        for params in [
            IterationParams {
                p_override: Some(200),
                q_override: Some(200),
                ..exact_params()
            },
            IterationParams {
                p_override: Some(50),
                q_override: Some(50),
                ..sampled_params(1.0)
            },
        ] {
            let mut rng_a = stream(9);
            let mut rng_b = stream(9);
            let a = iterate(&m, &c, &params, &mut rng_a).unwrap();
            let b = iterate(&m, &c, &params, &mut rng_b).unwrap();
            // Timing aside, the reports must agree bit-for-bit.
            let mut a_cmp = a.clone();
            let mut b_cmp = b.clone();
            a_cmp.wall_nanos = None;
            b_cmp.wall_nanos = None;
            assert_eq!(a_cmp, b_cmp);
        }
    }

    #[test]
    fn run_stops_on_threshold_or_max_iters() {
        let m = six_points();
        let c = six_point_centroids();
        let params = IterationParams {
            p_override: Some(2_000),
            q_override: Some(2_000),
            shift_threshold: 1e6, // immediately satisfied
            ..exact_params()
        };
        let traj = run(&m, &c, &params).unwrap();
        assert!(traj.converged);
        assert_eq!(traj.iterations.len(), 1);

        let params = IterationParams {
            shift_threshold: 0.0,
            max_iters: 3,
            p_override: Some(200),
            q_override: Some(200),
            ..exact_params()
        };
        let traj = run(&m, &c, &params).unwrap();
        assert!(!traj.converged, "threshold 0 is never reached by noise");
        assert_eq!(traj.iterations.len(), 3);
        assert_eq!(traj.final_centroids().iteration, 3);
    }

    #[test]
    fn entry_read_accounting_is_distinct_columns_times_d() {
        let m = six_points();
        let c = six_point_centroids();
        let params = IterationParams {
            p_override: Some(40),
            q_override: Some(40),
            ..exact_params()
        };
        m.reset_entry_reads();
        let mut rng = stream(12);
        let rep = iterate_eps0(&m, &c, &params, &mut rng).unwrap();
        assert_eq!(rep.entry_reads, rep.labels_computed * m.d() as u64);
        assert_eq!(
            rep.entry_reads,
            m.entry_reads(),
            "local tally matches counter"
        );
        assert!(rep.labels_computed <= 6);
    }

    #[test]
    fn epstau_read_accounting_adds_sign_reads() {
        let m = six_points();
        let c = six_point_centroids();
        let params = IterationParams {
            p_override: Some(30),
            q_override: Some(50),
            ..sampled_params(1.0)
        };
        m.reset_entry_reads();
        let mut rng = stream(13);
        let rep = iterate_epstau(&m, &c, &params, &mut rng).unwrap();
        // One column fetch per labeled nonzero column plus one sign read per
        // Q draw; the all-zero column at index 0 is labeled for free.
        assert!(rep.entry_reads <= rep.labels_computed * m.d() as u64 + rep.q_used as u64);
        assert!(rep.entry_reads >= rep.q_used as u64);
        assert_eq!(
            rep.entry_reads,
            m.entry_reads(),
            "local tally matches counter"
        );
    }
}
