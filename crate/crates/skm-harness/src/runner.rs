//! Seeded experiment orchestration.
//!
//! Trials run concurrently under rayon, but every random decision flows from
//! per-trial seeds derived with the core library's documented rule, so
//! reports are identical for any worker count. Trial order in the report is
//! always ascending.

use std::sync::OnceLock;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use skm_core::rng::{substream, TAG_GEN, TAG_ITERATION, TAG_TRIAL};
use skm_core::sublinear_kmeans::iterate;
use skm_core::{
    derived_seed, kmeanspp_init, lloyd_iterate, rss_cost, CentroidSet, SampleAccessMatrix,
};

use crate::config::{Algorithm, ExperimentConfig};
use crate::report::{
    Aggregate, IterationReportJson, OracleComparison, RunReport, SweepPoint, SweepReport,
    TrialReport, RUN_SCHEMA, SWEEP_SCHEMA,
};

/// How each trial obtains its starting centroids.
#[derive(Debug, Clone)]
pub enum InitSpec {
    /// Seeded D²-weighted seeding, re-drawn per trial.
    KmeansPP,
    /// The same fixed centroids for every trial.
    Fixed(CentroidSet),
}

/// Configure the global rayon pool from `SKM_THREADS` (first caller wins;
/// subsequent calls are no-ops, matching rayon's global-pool semantics).
pub fn init_threads() {
    static ONCE: OnceLock<()> = OnceLock::new();
    ONCE.get_or_init(|| {
        if let Ok(v) = std::env::var("SKM_THREADS") {
            if let Ok(threads) = v.parse::<usize>() {
                if threads >= 1 {
                    // Ignore failure: a pool may already exist in tests.
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build_global();
                }
            }
        }
    });
}

/// Largest centroid displacement between two sets of the same shape.
fn max_centroid_dist(a: &CentroidSet, b: &CentroidSet) -> f64 {
    (0..a.k())
        .map(|j| skm_core::sq_dist(a.centroid(j), b.centroid(j)).sqrt())
        .fold(0.0, f64::max)
}

/// Run one trial; `trial` indexes the derived seed streams.
fn run_trial(
    m: &SampleAccessMatrix,
    config: &ExperimentConfig,
    init: &InitSpec,
    trial: usize,
) -> Result<TrialReport> {
    let start = match init {
        InitSpec::KmeansPP => {
            let mut rng = substream(config.seed, TAG_GEN, trial as u64);
            kmeanspp_init(m, config.k, &mut rng)?
        }
        InitSpec::Fixed(c) => c.clone(),
    };
    if start.k() != config.k {
        return Err(anyhow!(
            "initial centroids have k={}, config says k={}",
            start.k(),
            config.k
        ));
    }

    let mut iterations = Vec::new();
    let mut oracle_errs = Vec::new();
    let mut current = start;
    let mut converged = false;

    match config.algorithm {
        Algorithm::Lloyd => {
            let nd = (m.n() * m.d()) as u64;
            for _ in 0..config.max_iters {
                let t0 = std::time::Instant::now();
                let next = lloyd_iterate(m, &current)?;
                let shift = current.mean_shift(&next)?;
                iterations.push(IterationReportJson {
                    p_used: 0,
                    q_used: 0,
                    per_cluster_p: Vec::new(),
                    per_cluster_q: Vec::new(),
                    empty_clusters: Vec::new(),
                    centroid_shift: shift,
                    labels_computed: m.n() as u64,
                    estimator_samples: 0,
                    entry_reads: nd,
                    rng_draws: 0,
                    wall_nanos: Some(t0.elapsed().as_nanos() as u64),
                });
                current = next;
                if shift <= config.shift_threshold {
                    converged = true;
                    break;
                }
            }
        }
        Algorithm::C1 | Algorithm::C2 => {
            let mut params = config.iteration_params();
            params.seed = derived_seed(config.seed, TAG_TRIAL, trial as u64);
            params.validate()?;
            for step in 0..config.max_iters {
                // Same per-iteration stream derivation as the core loop, so
                // this trajectory matches `sublinear_kmeans::run` exactly.
                let mut rng = substream(params.seed, TAG_ITERATION, step as u64);
                let report = iterate(m, &current, &params, &mut rng)?;
                if config.oracle {
                    let exact_next = lloyd_iterate(m, &current)?;
                    oracle_errs.push(max_centroid_dist(&report.new_centroids, &exact_next));
                }
                let shift = report.centroid_shift;
                iterations.push(IterationReportJson::from_core(&report));
                current = report.new_centroids;
                if shift <= config.shift_threshold {
                    converged = true;
                    break;
                }
            }
        }
    }

    let final_rss = if config.compute_rss {
        Some(rss_cost(m, &current)?)
    } else {
        None
    };
    let oracle = if config.oracle && config.algorithm != Algorithm::Lloyd {
        let exceeded = oracle_errs.iter().any(|&e| e > config.epsilon);
        Some(OracleComparison {
            per_iteration_max_err: oracle_errs,
            exceeded_epsilon: exceeded,
        })
    } else {
        None
    };
    Ok(TrialReport {
        trial,
        iterations,
        converged,
        final_rss,
        final_centroids: current.to_rows(),
        oracle,
    })
}

/// Run `config.trials` trials and assemble the aggregate report.
pub fn run_experiment(
    m: &SampleAccessMatrix,
    config: &ExperimentConfig,
    init: &InitSpec,
) -> Result<RunReport> {
    config.validate()?;
    init_threads();
    let trials: Vec<TrialReport> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(m, config, init, t).with_context(|| format!("trial {t}")))
        .collect::<Result<Vec<_>>>()?;

    let rss_values: Vec<f64> = trials.iter().filter_map(|t| t.final_rss).collect();
    let mean_final_rss = if rss_values.is_empty() {
        None
    } else {
        Some(rss_values.iter().sum::<f64>() / rss_values.len() as f64)
    };
    let failure_fraction = if config.oracle && config.algorithm != Algorithm::Lloyd {
        let failed = trials
            .iter()
            .filter(|t| t.oracle.as_ref().is_some_and(|o| o.exceeded_epsilon))
            .count();
        Some(failed as f64 / trials.len() as f64)
    } else {
        None
    };
    let aggregate = Aggregate {
        trials: trials.len(),
        failure_fraction,
        mean_final_rss,
        total_entry_reads: trials
            .iter()
            .flat_map(|t| t.iterations.iter())
            .map(|i| i.entry_reads)
            .sum(),
        total_rng_draws: trials
            .iter()
            .flat_map(|t| t.iterations.iter())
            .map(|i| i.rng_draws)
            .sum(),
        nd: (m.n() * m.d()) as u64,
    };
    Ok(RunReport {
        schema: RUN_SCHEMA.to_string(),
        config: config.clone(),
        aggregate,
        trials,
    })
}

/// Which knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    Epsilon,
    P,
    Q,
    K,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::P => "p",
            SweepParam::Q => "q",
            SweepParam::K => "k",
        }
    }
}

/// Run the experiment once per value of the swept parameter.
pub fn run_sweep(
    m: &SampleAccessMatrix,
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(anyhow!("sweep needs at least one value"));
    }
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut config = base.clone();
        match param {
            SweepParam::Epsilon => config.epsilon = value,
            SweepParam::P => config.p_override = Some(value as usize),
            SweepParam::Q => config.q_override = Some(value as usize),
            SweepParam::K => config.k = value as usize,
        }
        let report = run_experiment(m, &config, &InitSpec::KmeansPP)?;
        let finals: Vec<f64> = report
            .trials
            .iter()
            .filter_map(|t| {
                t.oracle
                    .as_ref()
                    .and_then(|o| o.per_iteration_max_err.last().copied())
            })
            .collect();
        let mean_final_oracle_err = if finals.is_empty() {
            None
        } else {
            Some(finals.iter().sum::<f64>() / finals.len() as f64)
        };
        points.push(SweepPoint {
            value,
            aggregate: report.aggregate,
            mean_final_oracle_err,
        });
    }
    Ok(SweepReport {
        schema: SWEEP_SCHEMA.to_string(),
        param: param.name().to_string(),
        config: base.clone(),
        points,
    })
}
