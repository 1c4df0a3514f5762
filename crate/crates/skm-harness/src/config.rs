//! Experiment configuration: what to run, on which data, how many times.

use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use skm_core::{AssignMode, IterationParams, SpectralMode};

use crate::dataset::DataFormat;

/// Which update rule a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Exact Lloyd iterations (the full-pass baseline).
    Lloyd,
    /// Sampled iteration with exact labels on the sampled columns.
    C1,
    /// Sampled iteration with relaxed (estimated) labels.
    C2,
}

/// A complete, serializable description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Dataset path; `None` means the caller supplies an in-memory matrix.
    pub dataset: Option<PathBuf>,
    pub format: DataFormat,
    pub algorithm: Algorithm,
    pub k: usize,
    pub epsilon: f64,
    /// Assignment slack; must be positive for `C2` and absent or 0 otherwise.
    #[serde(default)]
    pub tau: f64,
    pub delta: f64,
    /// Convergence threshold on the mean centroid shift.
    pub shift_threshold: f64,
    pub max_iters: u32,
    /// Constant multiplier overrides for the sample-size and estimator
    /// formulas (defaults match the analyzed guarantees).
    pub const_p: f64,
    pub const_q: f64,
    pub mm_groups: f64,
    pub mm_group_size: f64,
    /// Force sample sizes instead of the formula values.
    pub p_override: Option<usize>,
    pub q_override: Option<usize>,
    pub seed: u64,
    pub trials: usize,
    /// Pair every sampled iteration with an exact Lloyd step from the same
    /// starting centroids and report per-iteration deviations.
    pub oracle: bool,
    /// Compute the final residual sum of squares per trial (one full data
    /// pass; disable on very large inputs).
    pub compute_rss: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = IterationParams::default();
        Self {
            dataset: None,
            format: DataFormat::Auto,
            algorithm: Algorithm::C1,
            k: 2,
            epsilon: p.epsilon,
            tau: 0.0,
            delta: p.delta,
            shift_threshold: p.shift_threshold,
            max_iters: p.max_iters,
            const_p: p.const_p,
            const_q: p.const_q,
            mm_groups: p.mm_groups,
            mm_group_size: p.mm_group_size,
            p_override: None,
            q_override: None,
            seed: 0,
            trials: 1,
            oracle: false,
            compute_rss: true,
        }
    }
}

impl ExperimentConfig {
    /// Validate CLI-level constraints (the per-iteration parameters are
    /// validated again inside the core library).
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.k == 0 {
            bail!("k must be at least 1");
        }
        if let Some(path) = &self.dataset {
            if !path.exists() {
                bail!("dataset file {} does not exist", path.display());
            }
        }
        match self.algorithm {
            Algorithm::C2 => {
                if !(self.tau > 0.0) {
                    bail!("algorithm c2 requires a positive tau");
                }
            }
            _ => {
                if self.tau != 0.0 {
                    bail!("tau is only meaningful for algorithm c2");
                }
            }
        }
        Ok(())
    }

    /// Translate into the core iteration parameters (meaningless for Lloyd).
    pub fn iteration_params(&self) -> IterationParams {
        IterationParams {
            epsilon: self.epsilon,
            tau: self.tau,
            delta: self.delta,
            shift_threshold: self.shift_threshold,
            max_iters: self.max_iters,
            const_p: self.const_p,
            const_q: self.const_q,
            mm_groups: self.mm_groups,
            mm_group_size: self.mm_group_size,
            mode: match self.algorithm {
                Algorithm::C2 => AssignMode::Sampled,
                _ => AssignMode::Exact,
            },
            seed: self.seed,
            oracle: false,
            p_override: self.p_override,
            q_override: self.q_override,
            spectral: SpectralMode::FrobeniusUpper,
        }
    }
}
