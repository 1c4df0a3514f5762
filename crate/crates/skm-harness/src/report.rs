//! JSON report schemas. Reports are deterministic: identical configs
//! (including seeds) serialize to byte-identical JSON, because every float
//! is emitted in shortest round-trip form, struct field order is fixed, and
//! wall-clock times are kept out of the canonical form.

use serde::{Deserialize, Serialize};
use skm_core::sublinear_kmeans::IterationReport;

use crate::config::ExperimentConfig;

/// Schema tag for single-experiment reports.
pub const RUN_SCHEMA: &str = "skm-report/1";
/// Schema tag for parameter-sweep reports.
pub const SWEEP_SCHEMA: &str = "skm-sweep/1";

/// One iteration, as serialized. Mirrors the core report minus the centroid
/// payload (final centroids are reported once per trial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReportJson {
    pub p_used: usize,
    pub q_used: usize,
    pub per_cluster_p: Vec<u64>,
    pub per_cluster_q: Vec<u64>,
    pub empty_clusters: Vec<usize>,
    pub centroid_shift: f64,
    pub labels_computed: u64,
    pub estimator_samples: u64,
    pub entry_reads: u64,
    pub rng_draws: u64,
    /// Wall-clock nanoseconds; omitted from canonical (deterministic)
    /// reports.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_nanos: Option<u64>,
}

impl IterationReportJson {
    /// Convert the in-memory report, keeping wall time (strip it later for
    /// canonical output).
    pub fn from_core(r: &IterationReport) -> Self {
        Self {
            p_used: r.p_used,
            q_used: r.q_used,
            per_cluster_p: r.per_cluster_p.clone(),
            per_cluster_q: r.per_cluster_q.clone(),
            empty_clusters: r.empty_clusters.clone(),
            centroid_shift: r.centroid_shift,
            labels_computed: r.labels_computed,
            estimator_samples: r.estimator_samples,
            entry_reads: r.entry_reads,
            rng_draws: r.rng_draws,
            wall_nanos: r.wall_nanos,
        }
    }
}

/// Deviation of each sampled iteration from an exact Lloyd step taken from
/// the same starting centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    /// Per iteration: `max_j ||c_j - c_j*||`.
    pub per_iteration_max_err: Vec<f64>,
    /// True when any iteration's deviation exceeded the configured epsilon.
    pub exceeded_epsilon: bool,
}

/// One trial of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub iterations: Vec<IterationReportJson>,
    pub converged: bool,
    /// Residual sum of squares of the final centroids (omitted when RSS
    /// computation is disabled).
    pub final_rss: Option<f64>,
    pub final_centroids: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<OracleComparison>,
}

/// Whole-run aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    /// Fraction of trials whose oracle comparison exceeded epsilon (only
    /// with oracle pairing).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure_fraction: Option<f64>,
    pub mean_final_rss: Option<f64>,
    /// Total matrix entry reads across all trials and iterations (the
    /// empirical query count).
    pub total_entry_reads: u64,
    pub total_rng_draws: u64,
    /// `n * d`, the full-pass read count one exact iteration would need —
    /// the yardstick for sublinearity.
    pub nd: u64,
}

/// Top-level report for `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub aggregate: Aggregate,
    pub trials: Vec<TrialReport>,
}

impl RunReport {
    /// Remove wall-clock times everywhere, making the report canonical
    /// (byte-identical across reruns with the same seed).
    pub fn strip_wall_times(&mut self) {
        for t in &mut self.trials {
            for it in &mut t.iterations {
                it.wall_nanos = None;
            }
        }
    }

    /// Serialize as pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub aggregate: Aggregate,
    /// Mean over trials of the final iteration's oracle deviation (only with
    /// oracle pairing).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_final_oracle_err: Option<f64>,
}

/// Top-level report for `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub param: String,
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Serialize as pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
