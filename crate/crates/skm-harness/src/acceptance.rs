//! The acceptance suite: ten numbered end-to-end checks over the whole stack,
//! each a pure function of its seed.
//!
//! Every check returns a [`CriterionOutcome`] carrying a pass flag, a
//! one-line summary, and a canonical JSON report with no wall-clock content,
//! so a repeated run with the same seed must reproduce the report
//! byte-for-byte (that reproduction is itself the tenth check). All
//! tolerances live in the constants below.

use anyhow::{anyhow, Result};
use rand::Rng;
use serde_json::{json, Value};
use skm_core::rng::{substream, SkmRng, TAG_GEN, TAG_TRIAL};
use skm_core::sublinear_kmeans::iterate;
use skm_core::{
    build_instance, estimate_inner_product, kmeanspp_init, lloyd_iterate, predict_cost, rss_cost,
    sq_dist, AssignMode, CentroidSet, CostAlgorithm, CostInputs, EstimatorConfig, IterationParams,
    MatrixNorms, SampleAccessMatrix, SpectralMode,
};

use crate::config::{Algorithm, ExperimentConfig};
use crate::runner::{run_experiment, run_sweep, InitSpec, SweepParam};
use crate::synth::{
    gaussian_mixture, jitter_centers, min_assignment_gap, min_center_distance, simplex_centers,
};

/// Number of random matrices the sampler-fidelity check draws.
const SAMPLER_MATRICES: usize = 20;
/// Draws per sampler per matrix.
const SAMPLER_DRAWS: u64 = 1_000_000;
/// Total-variation tolerance for every sampler check.
const TV_TOLERANCE: f64 = 0.005;
/// Shape cap (`n * d`) for sampler matrices. Dimensions stay within 16x16,
/// and the cell cap keeps the expected empirical TV near
/// `sqrt(cells / (2 pi draws))` ~ 0.0028, safely inside the tolerance.
const MAX_SAMPLER_CELLS: usize = 48;

/// Trials for the statistical iteration checks (2, 3, and 6).
const TRIALS: usize = 200;
/// Failure budget those checks configure.
const DELTA: f64 = 0.2;
/// Pass threshold on the observed failure fraction:
/// `DELTA + 3 sqrt(DELTA (1 - DELTA) / TRIALS)` = 0.2849, rounded up to two
/// digits of slack.
const FAILURE_THRESHOLD: f64 = 0.29;

/// Random (v, c, tau) triples for the estimator check.
const ESTIMATOR_TRIPLES: usize = 50;
/// Estimator runs per triple.
const ESTIMATOR_RUNS: usize = 1_000;
/// Failure budget per estimator call.
const ESTIMATOR_DELTA: f64 = 0.1;
/// Per-triple success-rate threshold:
/// `1 - ESTIMATOR_DELTA - 3 sqrt(ESTIMATOR_DELTA (1 - ESTIMATOR_DELTA) / ESTIMATOR_RUNS)`.
const ESTIMATOR_RATE_THRESHOLD: f64 = 0.8715;

/// Trials per point in the sample-size scaling check.
const SCALING_TRIALS: usize = 20;
/// Weighted sample sizes the scaling check sweeps.
const SCALING_SIZES: [f64; 4] = [100.0, 1_000.0, 10_000.0, 100_000.0];
/// Acceptable window for the fitted log-log slope (ideal: -1/2).
const SLOPE_WINDOW: (f64, f64) = (-0.6, -0.4);

/// Relative tolerance for the zero-noise-vs-exact-baseline comparison.
const ORACLE_TOL: f64 = 1e-9;
/// Relative tolerance for the cost-model crossover agreement.
const CROSSOVER_TOL: f64 = 1e-9;

/// Frozen per-criterion seeds for the default suite.
pub const DEFAULT_SEEDS: [u64; 9] = [101, 202, 303, 404, 505, 606, 707, 808, 909];

/// Display names, indexed by criterion id minus one.
pub const CRITERION_NAMES: [&str; 10] = [
    "weighted samplers match analytic distributions",
    "exact-label iteration meets epsilon within the failure budget",
    "relaxed-label iteration meets (epsilon, tau) within the failure budget",
    "inner-product estimator concentrates within tau/4",
    "update error scales as the inverse square root of the sample size",
    "million-point iteration reads under half the matrix",
    "zero-noise paths reproduce the exact full-pass baseline",
    "accurate centroids reveal the planted bits",
    "cost model is monotone and matches the closed-form crossover",
    "identical seeds give byte-identical reports",
];

/// Result of one acceptance check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriterionOutcome {
    /// 1-based criterion id.
    pub id: usize,
    /// Display name (from [`CRITERION_NAMES`]).
    pub name: &'static str,
    /// Whether the check passed.
    pub pass: bool,
    /// One-line human summary with the decisive numbers.
    pub summary: String,
    /// Canonical JSON report: sorted keys, pretty-printed, trailing newline,
    /// no wall-clock content.
    pub report_json: String,
}

/// Run criterion `id` (1..=9) with an explicit seed. Criterion 10 is
/// [`determinism_check`], which needs the first-run outcomes as input.
pub fn run_criterion(id: usize, seed: u64) -> CriterionOutcome {
    let result = match id {
        1 => sampler_fidelity(seed),
        2 => exact_label_accuracy(seed),
        3 => relaxed_label_accuracy(seed),
        4 => estimator_concentration(seed),
        5 => sample_size_scaling(seed),
        6 => scale_sublinearity(seed),
        7 => zero_noise_equivalence(seed),
        8 => planted_bit_recovery(seed),
        9 => cost_model_consistency(seed),
        _ => Err(anyhow!("criterion id must be 1..=9, got {id}")),
    };
    match result {
        Ok((pass, summary, report)) => CriterionOutcome {
            id,
            name: CRITERION_NAMES[id - 1],
            pass,
            summary,
            report_json: canonical(&report),
        },
        Err(e) => CriterionOutcome {
            id,
            name: CRITERION_NAMES.get(id - 1).copied().unwrap_or("unknown"),
            pass: false,
            summary: format!("errored: {e:#}"),
            report_json: canonical(&json!({ "error": format!("{e:#}") })),
        },
    }
}

/// Run criterion `id` with its frozen default seed.
pub fn run_criterion_default(id: usize) -> CriterionOutcome {
    run_criterion(id, DEFAULT_SEEDS[id - 1])
}

/// Criterion 10: re-run criteria 1..=9 with the default seeds and demand
/// byte-identical reports (and identical verdicts) against the supplied
/// first-run outcomes.
pub fn determinism_check(first_runs: &[CriterionOutcome]) -> CriterionOutcome {
    let mut compared = Vec::new();
    let mut mismatched = Vec::new();
    for first in first_runs {
        compared.push(first.id);
        let again = run_criterion(first.id, DEFAULT_SEEDS[first.id - 1]);
        if again.report_json != first.report_json
            || again.pass != first.pass
            || again.summary != first.summary
        {
            mismatched.push(first.id);
        }
    }
    let all_present = compared.len() == 9 && (1..=9).all(|id| compared.contains(&id));
    let pass = mismatched.is_empty() && all_present;
    let summary = if pass {
        "all nine re-runs reproduced their reports byte-for-byte".to_string()
    } else if !all_present {
        format!("expected first-run outcomes for criteria 1..=9, got {compared:?}")
    } else {
        format!("criteria {mismatched:?} changed between identically seeded runs")
    };
    let report = json!({
        "criterion": 10,
        "compared": compared,
        "mismatched": mismatched,
        "seeds": DEFAULT_SEEDS.to_vec(),
        "pass": pass,
    });
    CriterionOutcome {
        id: 10,
        name: CRITERION_NAMES[9],
        pass,
        summary,
        report_json: canonical(&report),
    }
}

/// Canonical JSON encoding: `serde_json` objects sort keys, pretty printing
/// is deterministic, and a trailing newline closes the document.
fn canonical(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports are tree-shaped JSON");
    s.push('\n');
    s
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Largest per-cluster distance between centroid rows and a reference set.
fn max_err_vs(rows: &[Vec<f64>], reference: &CentroidSet) -> f64 {
    rows.iter()
        .enumerate()
        .map(|(j, row)| sq_dist(row, reference.centroid(j)).sqrt())
        .fold(0.0, f64::max)
}

// --- criterion 1 -----------------------------------------------------------

/// Result of a sampler validation pass over one matrix (see [`check_samplers`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerCheck {
    /// Outcome count of the largest sample space checked (`n * d` entries).
    pub outcomes: usize,
    /// Expected empirical TV for that space at this draw count,
    /// `sqrt(outcomes / (2 pi draws))` — a run is only conclusive when the
    /// tolerance clearly exceeds this.
    pub expected_tv: f64,
    pub tv_column_by_norm: f64,
    pub tv_row_in_column: f64,
    pub tv_entry: f64,
    pub tv_uniform: f64,
    /// Whether any zero-probability outcome was ever drawn (must stay false).
    pub zero_mass_drawn: bool,
}

impl SamplerCheck {
    /// Largest observed TV across the four samplers.
    pub fn max_tv(&self) -> f64 {
        self.tv_column_by_norm
            .max(self.tv_row_in_column)
            .max(self.tv_entry)
            .max(self.tv_uniform)
    }
}

/// Empirically validate all four samplers of a matrix against their analytic
/// distributions with `draws` draws each: columns by norm, rows within the
/// heaviest column by squared entry, global entries by absolute value, and
/// uniform columns.
pub fn check_samplers(m: &SampleAccessMatrix, draws: u64, seed: u64) -> Result<SamplerCheck> {
    let (n, d) = (m.n(), m.d());
    let mut rng = substream(seed, TAG_TRIAL, 0);

    let col_probs: Vec<f64> = (0..n)
        .map(|i| m.col_norm(i).unwrap() / m.norm_21())
        .collect();
    let mut col_counts = vec![0u64; n];
    for _ in 0..draws {
        col_counts[m.sample_column_by_norm(&mut rng)?] += 1;
    }
    let (tv_col, zv_col) = tv_distance(&col_counts, &col_probs, draws);

    let target = (0..n)
        .max_by(|&a, &b| {
            m.col_sq_norm(a)
                .unwrap()
                .total_cmp(&m.col_sq_norm(b).unwrap())
        })
        .ok_or_else(|| anyhow!("matrix has no columns"))?;
    let col = m.column(target)?.to_vec();
    let col_sq = m.col_sq_norm(target)?;
    let row_probs: Vec<f64> = col.iter().map(|v| v * v / col_sq).collect();
    let mut row_counts = vec![0u64; d];
    for _ in 0..draws {
        row_counts[m.sample_row_in_column(target, &mut rng)?] += 1;
    }
    let (tv_row, zv_row) = tv_distance(&row_counts, &row_probs, draws);

    let mut entry_probs = vec![0.0f64; n * d];
    for i in 0..n {
        for (l, v) in m.column(i)?.iter().enumerate() {
            entry_probs[i * d + l] = v.abs() / m.norm_11();
        }
    }
    let mut entry_counts = vec![0u64; n * d];
    for _ in 0..draws {
        let (i, l) = m.sample_entry(&mut rng)?;
        entry_counts[i * d + l] += 1;
    }
    let (tv_entry, zv_entry) = tv_distance(&entry_counts, &entry_probs, draws);

    let uni_probs = vec![1.0 / n as f64; n];
    let mut uni_counts = vec![0u64; n];
    for _ in 0..draws {
        uni_counts[m.sample_column_uniform(&mut rng)] += 1;
    }
    let (tv_uni, _) = tv_distance(&uni_counts, &uni_probs, draws);

    let outcomes = n * d;
    Ok(SamplerCheck {
        outcomes,
        expected_tv: (outcomes as f64 / (2.0 * std::f64::consts::PI * draws as f64)).sqrt(),
        tv_column_by_norm: tv_col,
        tv_row_in_column: tv_row,
        tv_entry,
        tv_uniform: tv_uni,
        zero_mass_drawn: zv_col || zv_row || zv_entry,
    })
}

/// Half the l1 distance between empirical frequencies and analytic masses;
/// also reports whether any zero-mass outcome was ever drawn.
fn tv_distance(counts: &[u64], probs: &[f64], draws: u64) -> (f64, bool) {
    let mut tv = 0.0;
    let mut zero_violation = false;
    for (&c, &p) in counts.iter().zip(probs.iter()) {
        tv += (c as f64 / draws as f64 - p).abs();
        if p == 0.0 && c > 0 {
            zero_violation = true;
        }
    }
    (tv / 2.0, zero_violation)
}

fn sampler_fidelity(seed: u64) -> Result<(bool, String, Value)> {
    let mut details = Vec::new();
    let mut max_tv = 0.0f64;
    let mut any_zero_violation = false;

    let mut dims_rng = substream(seed, TAG_GEN, 999_000);
    for t in 0..SAMPLER_MATRICES {
        let (n, d) = loop {
            let n = dims_rng.random_range(1..=16usize);
            let d = dims_rng.random_range(1..=16usize);
            if n * d <= MAX_SAMPLER_CELLS {
                break (n, d);
            }
        };

        // Entries: ~15% structural zeros, plus one all-zero column when the
        // matrix has room for it, so zero-mass outcomes exist to violate.
        let mut gen = substream(seed, TAG_GEN, t as u64);
        let mut values: Vec<f64> = (0..n * d)
            .map(|_| {
                if gen.random::<f64>() < 0.15 {
                    0.0
                } else {
                    gen.random::<f64>() * 2.0 - 1.0
                }
            })
            .collect();
        let zero_col = if n >= 2 {
            let z = gen.random_range(0..n);
            values[z * d..(z + 1) * d].fill(0.0);
            Some(z)
        } else {
            None
        };
        if values.iter().all(|&v| v == 0.0) {
            // Keep the matrix sampleable no matter what the zeros did.
            let col = zero_col.map_or(0, |z| (z + 1) % n);
            values[col * d] = 0.7;
        }
        let m = SampleAccessMatrix::from_columns(d, n, values.clone())?;

        let mut draw_rng = substream(seed, TAG_TRIAL, t as u64);

        // (a) Columns proportional to their Euclidean norms.
        let col_probs: Vec<f64> = (0..n)
            .map(|i| m.col_norm(i).unwrap() / m.norm_21())
            .collect();
        let mut col_counts = vec![0u64; n];
        for _ in 0..SAMPLER_DRAWS {
            col_counts[m.sample_column_by_norm(&mut draw_rng)?] += 1;
        }
        let (tv_col, zv_col) = tv_distance(&col_counts, &col_probs, SAMPLER_DRAWS);

        // (b) Rows within the heaviest column, proportional to squared entries.
        let target = (0..n)
            .max_by(|&a, &b| {
                m.col_sq_norm(a)
                    .unwrap()
                    .total_cmp(&m.col_sq_norm(b).unwrap())
            })
            .expect("n >= 1");
        let col_sq = m.col_sq_norm(target)?;
        let row_probs: Vec<f64> = (0..d)
            .map(|l| values[target * d + l].powi(2) / col_sq)
            .collect();
        let mut row_counts = vec![0u64; d];
        for _ in 0..SAMPLER_DRAWS {
            row_counts[m.sample_row_in_column(target, &mut draw_rng)?] += 1;
        }
        let (tv_row, zv_row) = tv_distance(&row_counts, &row_probs, SAMPLER_DRAWS);

        // (c) Global entries proportional to absolute values.
        let entry_probs: Vec<f64> = values.iter().map(|v| v.abs() / m.norm_11()).collect();
        let mut entry_counts = vec![0u64; n * d];
        for _ in 0..SAMPLER_DRAWS {
            let (i, l) = m.sample_entry(&mut draw_rng)?;
            entry_counts[i * d + l] += 1;
        }
        let (tv_entry, zv_entry) = tv_distance(&entry_counts, &entry_probs, SAMPLER_DRAWS);

        // (d) Uniform columns (the `P` sampler).
        let uni_probs = vec![1.0 / n as f64; n];
        let mut uni_counts = vec![0u64; n];
        for _ in 0..SAMPLER_DRAWS {
            uni_counts[m.sample_column_uniform(&mut draw_rng)] += 1;
        }
        let (tv_uni, _) = tv_distance(&uni_counts, &uni_probs, SAMPLER_DRAWS);

        let matrix_max = tv_col.max(tv_row).max(tv_entry).max(tv_uni);
        max_tv = max_tv.max(matrix_max);
        any_zero_violation |= zv_col || zv_row || zv_entry;
        details.push(json!({
            "n": n,
            "d": d,
            "zero_column": zero_col,
            "tv_column_by_norm": tv_col,
            "tv_row_in_column": tv_row,
            "tv_entry": tv_entry,
            "tv_uniform": tv_uni,
        }));
    }

    let pass = max_tv <= TV_TOLERANCE && !any_zero_violation;
    let summary = format!(
        "max TV {max_tv:.5} (tolerance {TV_TOLERANCE}) over {SAMPLER_MATRICES} matrices x \
         {SAMPLER_DRAWS} draws; zero-mass outcomes drawn: {any_zero_violation}"
    );
    let report = json!({
        "criterion": 1,
        "seed": seed,
        "draws_per_sampler": SAMPLER_DRAWS,
        "tolerance": TV_TOLERANCE,
        "max_tv": max_tv,
        "zero_mass_drawn": any_zero_violation,
        "matrices": details,
        "pass": pass,
    });
    Ok((pass, summary, report))
}

// --- criteria 2 and 3 ------------------------------------------------------

/// Shared fixture for the desk-scale accuracy checks: a balanced 4-cluster
/// Gaussian mixture in 10 dimensions whose margin floor guarantees a clean
/// assignment gap, plus the exact starting centroids.
fn accuracy_fixture(seed: u64) -> Result<(SampleAccessMatrix, CentroidSet, Vec<Vec<f64>>)> {
    let centers = simplex_centers(4, 10, 1.0)?;
    let mut gen = substream(seed, TAG_GEN, 100_000);
    let m = gaussian_mixture(&centers, 20_000, 0.02, Some(2.5), &mut gen)?;
    let init = CentroidSet::from_rows(&centers, 0)?;
    Ok((m, init, centers))
}

fn accuracy_run(
    seed: u64,
    criterion: usize,
    algorithm: Algorithm,
    tau_of: impl Fn(&SampleAccessMatrix, &CentroidSet) -> Result<f64>,
) -> Result<(bool, String, Value)> {
    let (m, init, centers) = accuracy_fixture(seed)?;
    let epsilon = 0.25 * min_center_distance(&centers);
    let tau = tau_of(&m, &init)?;
    let config = ExperimentConfig {
        algorithm,
        k: 4,
        epsilon,
        tau,
        delta: DELTA,
        shift_threshold: 0.0,
        max_iters: 1,
        trials: TRIALS,
        seed,
        oracle: true,
        compute_rss: false,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&m, &config, &InitSpec::Fixed(init))?;
    let errs: Vec<f64> = report
        .trials
        .iter()
        .map(|t| {
            t.oracle
                .as_ref()
                .map(|o| o.per_iteration_max_err[0])
                .ok_or_else(|| anyhow!("oracle comparison missing"))
        })
        .collect::<Result<_>>()?;
    let failure_fraction = report
        .aggregate
        .failure_fraction
        .ok_or_else(|| anyhow!("failure fraction missing"))?;
    let first_iter = &report.trials[0].iterations[0];
    let (p_used, q_used) = (first_iter.p_used, first_iter.q_used);
    let max_err = errs.iter().copied().fold(0.0, f64::max);

    let pass = failure_fraction <= FAILURE_THRESHOLD;
    let summary = format!(
        "failure fraction {failure_fraction:.3} <= {FAILURE_THRESHOLD} over {TRIALS} trials \
         (epsilon {epsilon:.4}, mean err {:.4}, max err {max_err:.4}, p {p_used}, q {q_used})",
        mean(&errs)
    );
    let report_json = json!({
        "criterion": criterion,
        "seed": seed,
        "n": m.n(),
        "d": m.d(),
        "k": 4,
        "epsilon": epsilon,
        "tau": tau,
        "delta": DELTA,
        "trials": TRIALS,
        "threshold": FAILURE_THRESHOLD,
        "failure_fraction": failure_fraction,
        "mean_err": mean(&errs),
        "max_err": max_err,
        "p_used": p_used,
        "q_used": q_used,
        "pass": pass,
    });
    Ok((pass, summary, report_json))
}

fn exact_label_accuracy(seed: u64) -> Result<(bool, String, Value)> {
    accuracy_run(seed, 2, Algorithm::C1, |_, _| Ok(0.0))
}

fn relaxed_label_accuracy(seed: u64) -> Result<(bool, String, Value)> {
    accuracy_run(seed, 3, Algorithm::C2, |m, init| {
        // Keep tau strictly below half the minimum squared-distance
        // assignment gap, so relaxed labels provably coincide with exact
        // labels outside the failure budget.
        Ok(0.49 * min_assignment_gap(m, init)?)
    })
}

// --- criterion 4 -----------------------------------------------------------

fn estimator_concentration(seed: u64) -> Result<(bool, String, Value)> {
    let cfg = EstimatorConfig::default();
    let mut details = Vec::new();
    let mut min_rate = 1.0f64;
    let mut counts_match_formula = true;

    for case in 0..ESTIMATOR_TRIPLES {
        let mut gen = substream(seed, TAG_GEN, 200_000 + case as u64);
        let d = 2 + (case % 15);
        let v: Vec<f64> = loop {
            let v: Vec<f64> = (0..d).map(|_| gen.random::<f64>() * 2.0 - 1.0).collect();
            if v.iter().any(|&x| x != 0.0) {
                break v;
            }
        };
        let c: Vec<f64> = loop {
            let c: Vec<f64> = (0..d).map(|_| gen.random::<f64>() * 2.0 - 1.0).collect();
            if c.iter().any(|&x| x != 0.0) {
                break c;
            }
        };
        let ratio = 0.5 + 1.5 * gen.random::<f64>();
        let m = SampleAccessMatrix::from_columns(d, 1, v.clone())?;
        let col_sq = m.col_sq_norm(0)?;
        let c_sq: f64 = c.iter().map(|x| x * x).sum();
        let tau = ratio * (col_sq * c_sq).sqrt();
        let truth: f64 = v.iter().zip(c.iter()).map(|(a, b)| a * b).sum();

        // The documented sample count: ceil(8 ln(1/delta)) groups of
        // ceil(64 ||v||^2 ||c||^2 / tau^2), mirrored operation for operation.
        let k_groups = (8.0 * (1.0 / ESTIMATOR_DELTA).ln()).ceil().max(1.0) as u64;
        let group_size = (64.0 * col_sq * c_sq / (tau * tau)).ceil().max(1.0) as u64;

        let mut run_rng = substream(seed, TAG_TRIAL, 200_000 + case as u64);
        let mut hits = 0usize;
        for _ in 0..ESTIMATOR_RUNS {
            let (est, used) =
                estimate_inner_product(&m, 0, &c, tau, ESTIMATOR_DELTA, &cfg, &mut run_rng)?;
            if used != k_groups * group_size {
                counts_match_formula = false;
            }
            if (est - truth).abs() <= tau / 4.0 * (1.0 + 1e-12) {
                hits += 1;
            }
        }
        let rate = hits as f64 / ESTIMATOR_RUNS as f64;
        min_rate = min_rate.min(rate);
        details.push(json!({
            "d": d,
            "tau_over_norms": ratio,
            "rate": rate,
            "samples_per_run": k_groups * group_size,
        }));
    }

    // Exact integer verification of the single-draw variance bound
    // Var[X] <= ||v||^2 ||c||^2 on quarter-integer grid vectors, d <= 8.
    // With v = a/4, c = b/4: 256 Var[X] = s * bb_supp - (ab)^2 where
    // s = sum a^2, bb_supp = sum of b^2 over the support of a, and
    // 256 ||v||^2 ||c||^2 = s * bb. Both comparisons are exact in i128.
    let mut grid_rng = substream(seed, TAG_GEN, 300_000);
    let mut variance_bound_exact = true;
    let mut grid_cases = 0u64;
    for case in 0..200 {
        let d = 1 + (case % 8);
        let a: Vec<i128> = (0..d)
            .map(|_| grid_rng.random_range(-8i32..=8) as i128)
            .collect();
        let b: Vec<i128> = (0..d)
            .map(|_| grid_rng.random_range(-8i32..=8) as i128)
            .collect();
        let s: i128 = a.iter().map(|x| x * x).sum();
        if s == 0 {
            continue;
        }
        grid_cases += 1;
        let ab: i128 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
        let bb: i128 = b.iter().map(|x| x * x).sum();
        let bb_supp: i128 = a
            .iter()
            .zip(b.iter())
            .filter(|(x, _)| **x != 0)
            .map(|(_, y)| y * y)
            .sum();
        // Cauchy-Schwarz over the support: the variance is nonnegative...
        variance_bound_exact &= ab * ab <= s * bb_supp;
        // ...and bounded by the norm product.
        variance_bound_exact &= s * bb_supp - ab * ab <= s * bb;
    }

    let pass = min_rate >= ESTIMATOR_RATE_THRESHOLD && counts_match_formula && variance_bound_exact;
    let summary = format!(
        "min per-triple success rate {min_rate:.4} >= {ESTIMATOR_RATE_THRESHOLD} \
         ({ESTIMATOR_TRIPLES} triples x {ESTIMATOR_RUNS} runs); sample counts match formula: \
         {counts_match_formula}; exact variance bound on {grid_cases} grid pairs: \
         {variance_bound_exact}"
    );
    let report = json!({
        "criterion": 4,
        "seed": seed,
        "triples": ESTIMATOR_TRIPLES,
        "runs_per_triple": ESTIMATOR_RUNS,
        "delta": ESTIMATOR_DELTA,
        "rate_threshold": ESTIMATOR_RATE_THRESHOLD,
        "min_rate": min_rate,
        "counts_match_formula": counts_match_formula,
        "variance_bound_exact": variance_bound_exact,
        "grid_cases": grid_cases,
        "cases": details,
        "pass": pass,
    });
    Ok((pass, summary, report))
}

// --- criterion 5 -----------------------------------------------------------

fn sample_size_scaling(seed: u64) -> Result<(bool, String, Value)> {
    // One cluster: the exact update is the global mean no matter the start,
    // and forcing p = n removes all mass-estimation noise, so the remaining
    // error is purely the weighted-sample average over q draws.
    let centers = simplex_centers(1, 8, 1.0)?;
    let mut gen = substream(seed, TAG_GEN, 400_000);
    let m = gaussian_mixture(&centers, 2_000, 0.5, None, &mut gen)?;
    let base = ExperimentConfig {
        algorithm: Algorithm::C1,
        k: 1,
        epsilon: 0.5,
        delta: 0.2,
        shift_threshold: 0.0,
        max_iters: 1,
        trials: SCALING_TRIALS,
        seed,
        oracle: true,
        compute_rss: false,
        p_override: Some(2_000),
        ..ExperimentConfig::default()
    };
    let sweep = run_sweep(&m, &base, SweepParam::Q, &SCALING_SIZES)?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut points = Vec::new();
    for point in &sweep.points {
        let err = point
            .mean_final_oracle_err
            .ok_or_else(|| anyhow!("sweep point lost its oracle error"))?;
        xs.push(point.value.ln());
        ys.push(err.ln());
        points.push(json!({ "q": point.value, "mean_err": err }));
    }
    let slope = ols_slope(&xs, &ys);
    let pass = slope >= SLOPE_WINDOW.0 && slope <= SLOPE_WINDOW.1;
    let summary = format!(
        "log-log slope {slope:.4} within [{}, {}] over q in {SCALING_SIZES:?} \
         ({SCALING_TRIALS} trials per point)",
        SLOPE_WINDOW.0, SLOPE_WINDOW.1
    );
    let report = json!({
        "criterion": 5,
        "seed": seed,
        "trials_per_point": SCALING_TRIALS,
        "slope": slope,
        "window": [SLOPE_WINDOW.0, SLOPE_WINDOW.1],
        "points": points,
        "pass": pass,
    });
    Ok((pass, summary, report))
}

// --- criterion 6 -----------------------------------------------------------

fn scale_sublinearity(seed: u64) -> Result<(bool, String, Value)> {
    let n = 1_000_000usize;
    let d = 20usize;
    let k = 5usize;
    let epsilon = 0.7;

    let centers = simplex_centers(k, d, 1.0)?;
    let mut gen = substream(seed, TAG_GEN, 500_000);
    let m = gaussian_mixture(&centers, n, 0.02, None, &mut gen)?;
    let init_rows = jitter_centers(&centers, 0.05, &mut gen);
    let init = CentroidSet::from_rows(&init_rows, 0)?;

    // The exact one-step reference is identical for every trial because the
    // start is fixed; compute it once instead of once per trial.
    let exact_next = lloyd_iterate(&m, &init)?;

    let config = ExperimentConfig {
        algorithm: Algorithm::C1,
        k,
        epsilon,
        delta: DELTA,
        shift_threshold: 0.0,
        max_iters: 1,
        trials: TRIALS,
        seed,
        oracle: false,
        compute_rss: false,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&m, &config, &InitSpec::Fixed(init))?;

    let errs: Vec<f64> = report
        .trials
        .iter()
        .map(|t| max_err_vs(&t.final_centroids, &exact_next))
        .collect();
    let failures = errs.iter().filter(|&&e| e > epsilon).count();
    let failure_fraction = failures as f64 / TRIALS as f64;
    let first_iter = &report.trials[0].iterations[0];
    let (p_used, q_used) = (first_iter.p_used, first_iter.q_used);
    let max_reads = report
        .trials
        .iter()
        .map(|t| t.iterations[0].entry_reads)
        .max()
        .unwrap_or(0);

    let budget = n / 20;
    let read_cap = (n * d) as u64 / 2;
    let sample_ok = p_used + q_used <= budget;
    let reads_ok = max_reads < read_cap;
    let accuracy_ok = failure_fraction <= FAILURE_THRESHOLD;
    let pass = sample_ok && reads_ok && accuracy_ok;
    let summary = format!(
        "p+q {} <= n/20 {budget}; max entry reads {max_reads} < nd/2 {read_cap}; \
         failure fraction {failure_fraction:.3} <= {FAILURE_THRESHOLD} (max err {:.4} vs \
         epsilon {epsilon})",
        p_used + q_used,
        errs.iter().copied().fold(0.0, f64::max)
    );
    let report_json = json!({
        "criterion": 6,
        "seed": seed,
        "n": n,
        "d": d,
        "k": k,
        "epsilon": epsilon,
        "delta": DELTA,
        "trials": TRIALS,
        "p_used": p_used,
        "q_used": q_used,
        "sample_budget": budget,
        "max_entry_reads": max_reads,
        "read_cap": read_cap,
        "failure_fraction": failure_fraction,
        "threshold": FAILURE_THRESHOLD,
        "mean_err": mean(&errs),
        "max_err": errs.iter().copied().fold(0.0, f64::max),
        "pass": pass,
    });
    Ok((pass, summary, report_json))
}

// --- criterion 7 -----------------------------------------------------------

/// Deliberately plain re-derivation of one exact update step: label by
/// brute-force nearest centroid, sum clusters in ascending point order,
/// divide, keep empty clusters in place. Must match the library bit-for-bit.
fn naive_lloyd(m: &SampleAccessMatrix, c: &CentroidSet) -> Result<Vec<Vec<f64>>> {
    let d = m.d();
    let k = c.k();
    let mut sums = vec![vec![0.0f64; d]; k];
    let mut counts = vec![0u64; k];
    for i in 0..m.n() {
        let col = m.column(i)?;
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (j, cent) in c.iter().enumerate() {
            let dist = sq_dist(col, cent);
            if dist < best_dist {
                best_dist = dist;
                best = j;
            }
        }
        counts[best] += 1;
        for (s, &v) in sums[best].iter_mut().zip(col.iter()) {
            *s += v;
        }
    }
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        if counts[j] == 0 {
            out.push(c.centroid(j).to_vec());
        } else {
            out.push(sums[j].iter().map(|s| s / counts[j] as f64).collect());
        }
    }
    Ok(out)
}

fn naive_rss(m: &SampleAccessMatrix, c: &CentroidSet) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..m.n() {
        let col = m.column(i)?;
        total += c
            .iter()
            .map(|cent| sq_dist(col, cent))
            .fold(f64::INFINITY, f64::min);
    }
    Ok(total)
}

fn zero_noise_equivalence(seed: u64) -> Result<(bool, String, Value)> {
    let cases = 200usize;
    let mut bitwise_matches = 0usize;
    let mut max_oracle_rel = 0.0f64;
    let mut max_rss_rel = 0.0f64;
    let mut pass = true;

    for case in 0..cases {
        let mut rng = substream(seed, TAG_GEN, 600_000 + case as u64);
        let n = rng.random_range(2..=16usize);
        let d = rng.random_range(1..=4usize); // keeps n * d <= 64
        let values: Vec<f64> = (0..n * d)
            .map(|_| {
                if rng.random::<f64>() < 0.1 {
                    0.0
                } else {
                    rng.random::<f64>() * 4.0 - 2.0
                }
            })
            .collect();
        let m = SampleAccessMatrix::from_columns(d, n, values)?;
        let k = rng.random_range(1..=n.min(5));
        let init = kmeanspp_init(&m, k, &mut rng)?;

        let lib = lloyd_iterate(&m, &init)?;
        let naive = naive_lloyd(&m, &init)?;
        let bits_equal = (0..k).all(|j| {
            lib.centroid(j)
                .iter()
                .zip(naive[j].iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
        });
        if bits_equal {
            bitwise_matches += 1;
        } else {
            pass = false;
        }

        // Zero-noise sampled paths must land within ORACLE_TOL of the exact
        // step (they factor the same sums through lambda arithmetic).
        for mode in [AssignMode::Exact, AssignMode::Sampled] {
            let params = IterationParams {
                epsilon: 0.5,
                tau: if mode == AssignMode::Sampled {
                    1.0
                } else {
                    0.0
                },
                delta: 0.1,
                mode,
                oracle: true,
                seed,
                ..IterationParams::default()
            };
            let mut rng2 = substream(seed, TAG_TRIAL, case as u64);
            let rep = iterate(&m, &init, &params, &mut rng2)?;
            for j in 0..k {
                for (got, want) in rep
                    .new_centroids
                    .centroid(j)
                    .iter()
                    .zip(lib.centroid(j).iter())
                {
                    let rel = (got - want).abs() / want.abs().max(1.0);
                    max_oracle_rel = max_oracle_rel.max(rel);
                    if rel > ORACLE_TOL {
                        pass = false;
                    }
                }
            }
        }

        let lib_rss = rss_cost(&m, &init)?;
        let plain_rss = naive_rss(&m, &init)?;
        let rel = (lib_rss - plain_rss).abs() / plain_rss.abs().max(1.0);
        max_rss_rel = max_rss_rel.max(rel);
        if rel > 1e-12 {
            pass = false;
        }
    }

    let summary = format!(
        "{bitwise_matches}/{cases} exact updates bit-identical to the naive mirror; \
         zero-noise deviation {max_oracle_rel:.2e} <= {ORACLE_TOL:.0e}; \
         cost deviation {max_rss_rel:.2e}"
    );
    let report = json!({
        "criterion": 7,
        "seed": seed,
        "cases": cases,
        "bitwise_matches": bitwise_matches,
        "max_zero_noise_rel_err": max_oracle_rel,
        "zero_noise_tolerance": ORACLE_TOL,
        "max_rss_rel_err": max_rss_rel,
        "pass": pass,
    });
    Ok((pass, summary, report))
}

// --- criterion 8 -----------------------------------------------------------

fn planted_bit_recovery(seed: u64) -> Result<(bool, String, Value)> {
    let eps = 0.05;
    let mut details = Vec::new();
    let mut pass = true;

    for (idx, &d) in [4usize, 8, 16, 32].iter().enumerate() {
        let mut rng = substream(seed, TAG_GEN, 700_000 + idx as u64);
        let inst = build_instance(128, 4, d, 1.0, &mut rng)?;

        let exact = inst.exact_centroids();
        let clean = inst.recover_hamming(&exact, None)?;
        let weight_ok = clean
            .sums_true
            .iter()
            .all(|sums| sums.iter().sum::<u64>() == (inst.cluster_size() * (d / 2)) as u64);
        let clean_ok = clean.rounded_match && clean.max_abs_dev < 1e-9 && clean.subset_ok;

        // Perturb each centroid by a vector of Euclidean norm exactly eps and
        // demand the advertised subset guarantee at that eps.
        let mut noisy = exact.clone();
        for j in 0..4 {
            let dir: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            for (c, dv) in noisy.centroid_mut(j).iter_mut().zip(dir.iter()) {
                *c += eps * dv / norm;
            }
        }
        let noisy_report = inst.recover_hamming(&noisy, Some(eps))?;
        let min_subset = noisy_report
            .subsets
            .iter()
            .map(|s| s.len())
            .min()
            .unwrap_or(0);
        let noisy_ok = noisy_report.subset_ok && min_subset >= (d / 4).max(1);

        pass &= clean_ok && weight_ok && noisy_ok;
        details.push(json!({
            "d": d,
            "clean_rounded_match": clean.rounded_match,
            "clean_max_abs_dev": clean.max_abs_dev,
            "clean_subset_ok": clean.subset_ok,
            "clean_eps_used": clean.eps_used,
            "hamming_weight_consistent": weight_ok,
            "noisy_subset_ok": noisy_report.subset_ok,
            "noisy_subset_bound": noisy_report.subset_bound,
            "noisy_min_subset_len": min_subset,
            "noisy_max_abs_dev": noisy_report.max_abs_dev,
        }));
    }

    let summary = format!(
        "clean centroids invert to exact bit sums and eps={eps} perturbations keep \
         at least floor(d/4) coordinates within the deviation bound: {pass}"
    );
    let report = json!({
        "criterion": 8,
        "seed": seed,
        "n": 128,
        "k": 4,
        "alpha": 1.0,
        "eps": eps,
        "dimensions": details,
        "pass": pass,
    });
    Ok((pass, summary, report))
}

// --- criterion 9 -----------------------------------------------------------

fn cost_model_consistency(seed: u64) -> Result<(bool, String, Value)> {
    // Hand-built norms respecting the full chain
    // norm_2inf <= spectral <= frobenius <= norm_21 <= norm_11.
    let norms = MatrixNorms {
        spectral_upper: 30.0,
        frobenius: 30.0,
        norm_21: 250.0,
        norm_11: 700.0,
        norm_2inf: 3.0,
        mode: SpectralMode::FrobeniusUpper,
    };
    let base = CostInputs {
        n: 10_000,
        d: 50,
        k: 4,
        epsilon: 0.2,
        tau: Some(0.5),
        delta: 0.1,
        qrag: false,
    };

    // Cost-increasing directions: k up, epsilon down, delta down, tau down.
    let k_grid = [2u64, 4, 8, 16];
    let eps_grid = [0.4, 0.2, 0.1, 0.05];
    let delta_grid = [0.2, 0.1, 0.05];
    let tau_grid = [2.0, 1.0, 0.5, 0.25];

    let slack = 1e-12;
    let mut monotone = true;
    let mut violations = Vec::new();
    for qrag in [false, true] {
        for algorithm in CostAlgorithm::ALL {
            let mut walks: Vec<(&str, Vec<CostInputs>)> = Vec::new();
            walks.push((
                "k",
                k_grid
                    .iter()
                    .map(|&k| CostInputs { k, qrag, ..base })
                    .collect(),
            ));
            walks.push((
                "epsilon",
                eps_grid
                    .iter()
                    .map(|&epsilon| CostInputs {
                        epsilon,
                        qrag,
                        ..base
                    })
                    .collect(),
            ));
            walks.push((
                "delta",
                delta_grid
                    .iter()
                    .map(|&delta| CostInputs {
                        delta,
                        qrag,
                        ..base
                    })
                    .collect(),
            ));
            walks.push((
                "tau",
                tau_grid
                    .iter()
                    .map(|&tau| CostInputs {
                        tau: Some(tau),
                        qrag,
                        ..base
                    })
                    .collect(),
            ));
            for (direction, inputs) in walks {
                let estimates: Vec<_> = inputs
                    .iter()
                    .map(|inp| predict_cost(algorithm, &norms, inp))
                    .collect::<skm_core::Result<_>>()?;
                let ok = estimates.windows(2).all(|w| {
                    w[1].queries >= w[0].queries * (1.0 - slack)
                        && w[1].time >= w[0].time * (1.0 - slack)
                });
                if !ok {
                    monotone = false;
                    violations.push(format!("{algorithm:?}/{direction}/qrag={qrag}"));
                }
            }
        }
    }

    // Epsilon crossover between the two exact-label rows: queries scale as
    // A / eps^2 (classical) versus B / eps (quantum), so they cross at
    // eps* = A / B exactly. Verify the closed form against a bisection on
    // the difference and against direct equality of both predictions.
    let at = |algorithm: CostAlgorithm, epsilon: f64| -> Result<f64> {
        Ok(predict_cost(algorithm, &norms, &CostInputs { epsilon, ..base })?.queries)
    };
    let a = at(CostAlgorithm::C1, 1.0)?;
    let b = at(CostAlgorithm::Q1, 1.0)?;
    let closed = a / b;

    let g =
        |eps: f64| -> Result<f64> { Ok(at(CostAlgorithm::C1, eps)? - at(CostAlgorithm::Q1, eps)?) };
    let (mut lo, mut hi) = (1e-4, 10.0);
    if !(g(lo)? > 0.0 && g(hi)? < 0.0) {
        return Err(anyhow!(
            "crossover bracket failed: g({lo}) and g({hi}) do not straddle 0"
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bisected = 0.5 * (lo + hi);
    let root_rel = (bisected - closed).abs() / closed;
    let q_c1 = at(CostAlgorithm::C1, closed)?;
    let q_q1 = at(CostAlgorithm::Q1, closed)?;
    let value_rel = (q_c1 - q_q1).abs() / q_c1.max(q_q1);
    let crossover_ok = root_rel <= CROSSOVER_TOL && value_rel <= CROSSOVER_TOL;

    let pass = monotone && crossover_ok;
    let summary = format!(
        "monotone over k/epsilon/delta/tau on all 6 rows (both memory models): {monotone}; \
         crossover eps* {closed:.6} agrees with bisection to {root_rel:.2e} and both rows \
         to {value_rel:.2e}"
    );
    let report = json!({
        "criterion": 9,
        "seed": seed,
        "monotone": monotone,
        "violations": violations,
        "eps_star_closed_form": closed,
        "eps_star_bisected": bisected,
        "root_rel_err": root_rel,
        "queries_at_crossover": { "c1": q_c1, "q1": q_q1 },
        "value_rel_err": value_rel,
        "tolerance": CROSSOVER_TOL,
        "pass": pass,
    });
    Ok((pass, summary, report))
}

// Keep an explicit handle on the RNG type so criteria stay on the library's
// seeded stream discipline (compile-time check only).
#[allow(dead_code)]
fn _stream_discipline(rng: &mut SkmRng) -> f64 {
    rng.random::<f64>()
}
