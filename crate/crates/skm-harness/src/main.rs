//! `skm` — command-line harness for sampling-based k-means experiments.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use skm_core::rng::{stream, substream, TAG_GEN};
use skm_core::{
    build_instance, predict_cost, CostAlgorithm, CostInputs, SampleAccessMatrix, SpectralMode,
};
use skm_harness::acceptance::{
    check_samplers, determinism_check, run_criterion, run_criterion_default, CriterionOutcome,
};
use skm_harness::config::{Algorithm, ExperimentConfig};
use skm_harness::dataset::{load_dataset, write_csv, write_f64le, DataFormat};
use skm_harness::runner::{run_experiment, run_sweep, InitSpec, SweepParam};
use skm_harness::synth::{gaussian_mixture, simplex_centers};

#[derive(Parser)]
#[command(
    name = "skm",
    about = "Sublinear k-means experiment harness: sampled Lloyd iterations, \
             sweeps, planted instances, and cost prediction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment (repeated trials of a k-means run) on a dataset and
    /// print a JSON report.
    Run(RunArgs),
    /// Sweep one parameter across several values, reporting per-point
    /// aggregates.
    Sweep(SweepArgs),
    /// Generate a synthetic Gaussian-mixture dataset.
    GenSynthetic(GenSyntheticArgs),
    /// Generate a planted bit-vector instance (dataset plus a JSON sidecar
    /// with the hidden bits).
    GenAdversarial(GenAdversarialArgs),
    /// Predict per-iteration query and time costs from matrix norms.
    PredictCost(PredictCostArgs),
    /// Empirically validate the weighted samplers on a dataset.
    ValidateSampler(ValidateSamplerArgs),
    /// Run the acceptance suite (or one criterion) and print one pass/fail
    /// line per criterion.
    Acceptance(AcceptanceArgs),
}

/// Parameters shared by `run` and `sweep`. Unset values fall back to the
/// library defaults, so the defaults live in exactly one place.
#[derive(Args)]
struct ExperimentArgs {
    /// Dataset file (CSV rows or the SKM1 binary format).
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Auto)]
    format: DataFormat,
    /// Iteration algorithm: the exact full-pass baseline or a sampled one.
    #[arg(long, value_enum)]
    algorithm: Option<Algorithm>,
    /// Number of clusters.
    #[arg(long)]
    k: Option<usize>,
    /// Per-centroid accuracy target.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Assignment slack (squared distance); required positive for c2.
    #[arg(long)]
    tau: Option<f64>,
    /// Per-iteration failure budget.
    #[arg(long)]
    delta: Option<f64>,
    /// Stop once the mean centroid shift drops this low.
    #[arg(long)]
    shift_threshold: Option<f64>,
    /// Iteration cap per trial.
    #[arg(long)]
    max_iters: Option<u32>,
    /// Independent repetitions of the whole run.
    #[arg(long)]
    trials: Option<usize>,
    /// Root seed; every stream below it is derived deterministically.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplier in the uniform sample-size formula.
    #[arg(long)]
    const_p: Option<f64>,
    /// Multiplier in the weighted sample-size formula.
    #[arg(long)]
    const_q: Option<f64>,
    /// Median-of-means group-count multiplier.
    #[arg(long)]
    mm_groups: Option<f64>,
    /// Median-of-means group-size multiplier.
    #[arg(long)]
    mm_group_size: Option<f64>,
    /// Force the uniform sample size instead of the formula value.
    #[arg(long)]
    p_override: Option<usize>,
    /// Force the weighted sample size instead of the formula value.
    #[arg(long)]
    q_override: Option<usize>,
    /// Pair every sampled iteration with an exact step from the same
    /// centroids and report the deviation.
    #[arg(long)]
    oracle: bool,
    /// Skip the final residual-sum-of-squares pass (recommended on very
    /// large datasets).
    #[arg(long)]
    no_rss: bool,
    /// Strip wall-clock times so the report is byte-reproducible.
    #[arg(long)]
    canonical: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn to_config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            dataset: Some(self.dataset.clone()),
            format: self.format,
            ..ExperimentConfig::default()
        };
        if let Some(v) = self.algorithm {
            c.algorithm = v;
        }
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if let Some(v) = self.shift_threshold {
            c.shift_threshold = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.const_p {
            c.const_p = v;
        }
        if let Some(v) = self.const_q {
            c.const_q = v;
        }
        if let Some(v) = self.mm_groups {
            c.mm_groups = v;
        }
        if let Some(v) = self.mm_group_size {
            c.mm_group_size = v;
        }
        c.p_override = self.p_override;
        c.q_override = self.q_override;
        c.oracle = self.oracle;
        c.compute_rss = !self.no_rss;
        c
    }

    fn load_matrix(&self) -> Result<SampleAccessMatrix> {
        load_dataset(&self.dataset, self.format)
            .with_context(|| format!("loading {}", self.dataset.display()))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Which parameter to sweep.
    #[arg(long, value_enum)]
    param: SweepParam,
    /// Comma-separated values for the swept parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

#[derive(Args)]
struct GenSyntheticArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    /// Number of mixture components (placed on a scaled simplex; needs
    /// k <= d).
    #[arg(long)]
    k: usize,
    /// Per-coordinate noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Distance of each center from the origin.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Optional margin floor: resample any point whose assignment gap (in
    /// noise standard deviations) falls below this.
    #[arg(long)]
    margin_floor: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = DataFormat::F64le)]
    format: DataFormat,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenAdversarialArgs {
    /// Number of points (must be divisible by k).
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    d: usize,
    /// Scale factor of the planted structure.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset file (binary); the hidden bits land in
    /// `<out>.meta.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictCostArgs {
    /// Compute norms from this dataset (otherwise pass the norms explicitly).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DataFormat::Auto)]
    format: DataFormat,
    #[arg(long, required_unless_present = "dataset")]
    spectral_upper: Option<f64>,
    #[arg(long, required_unless_present = "dataset")]
    frobenius: Option<f64>,
    #[arg(long, required_unless_present = "dataset")]
    norm_21: Option<f64>,
    #[arg(long, required_unless_present = "dataset")]
    norm_11: Option<f64>,
    #[arg(long, required_unless_present = "dataset")]
    norm_2inf: Option<f64>,
    /// Number of points (taken from the dataset when one is given).
    #[arg(long, required_unless_present = "dataset")]
    n: Option<u64>,
    /// Dimension (taken from the dataset when one is given).
    #[arg(long, required_unless_present = "dataset")]
    d: Option<u64>,
    #[arg(long, default_value_t = 4)]
    k: u64,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    /// Assignment slack; required for the relaxed-label rows.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Assume the stronger quantum memory model.
    #[arg(long)]
    qrag: bool,
    /// Estimate the spectral norm by power iteration instead of using the
    /// Frobenius upper bound (dataset mode only).
    #[arg(long)]
    power_iteration: bool,
}

#[derive(Args)]
struct ValidateSamplerArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Auto)]
    format: DataFormat,
    #[arg(long, default_value_t = 1_000_000)]
    draws: u64,
    /// Maximum allowed total-variation distance per sampler.
    #[arg(long, default_value_t = 0.005)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AcceptanceArgs {
    /// Run a single criterion (1-9) instead of the whole suite.
    #[arg(long)]
    criterion: Option<usize>,
    /// Seed override for a single criterion run.
    #[arg(long, requires = "criterion")]
    seed: Option<u64>,
    /// Also print each criterion's JSON report.
    #[arg(long)]
    report: bool,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::GenSynthetic(args) => cmd_gen_synthetic(args),
        Command::GenAdversarial(args) => cmd_gen_adversarial(args),
        Command::PredictCost(args) => cmd_predict_cost(args),
        Command::ValidateSampler(args) => cmd_validate_sampler(args),
        Command::Acceptance(args) => cmd_acceptance(args),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))?
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let config = args.experiment.to_config();
    let m = args.experiment.load_matrix()?;
    let mut report = run_experiment(&m, &config, &InitSpec::KmeansPP)?;
    if args.experiment.canonical {
        report.strip_wall_times();
    }
    emit(&args.experiment.out, &report.to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let config = args.experiment.to_config();
    let m = args.experiment.load_matrix()?;
    let report = run_sweep(&m, &config, args.param, &args.values)?;
    emit(&args.experiment.out, &report.to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_synthetic(args: GenSyntheticArgs) -> Result<ExitCode> {
    let centers = simplex_centers(args.k, args.d, args.radius)?;
    let mut rng = substream(args.seed, TAG_GEN, 0);
    let m = gaussian_mixture(&centers, args.n, args.sigma, args.margin_floor, &mut rng)?;
    match args.format {
        DataFormat::Csv => write_csv(&args.out, &m)?,
        _ => write_f64le(&args.out, &m)?,
    }
    eprintln!(
        "wrote {} points ({} dims, {} clusters, sigma {}) to {}",
        args.n,
        args.d,
        args.k,
        args.sigma,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_adversarial(args: GenAdversarialArgs) -> Result<ExitCode> {
    let mut rng = stream(args.seed);
    let inst = build_instance(args.n, args.k, args.d, args.alpha, &mut rng)?;
    let m = inst.matrix()?;
    write_f64le(&args.out, &m)?;

    let meta = json!({
        "schema": "skm-adversarial/1",
        "n": args.n,
        "k": args.k,
        "d": args.d,
        "alpha": args.alpha,
        "seed": args.seed,
        "cluster_size": inst.cluster_size(),
        "data_path": args.out.display().to_string(),
        "hidden_bits": inst.hidden_bits(),
    });
    let meta_path = args.out.with_extension(format!(
        "{}meta.json",
        args.out
            .extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    std::fs::write(&meta_path, text).with_context(|| format!("writing {}", meta_path.display()))?;
    eprintln!(
        "wrote planted instance to {} (hidden bits in {})",
        args.out.display(),
        meta_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_predict_cost(args: PredictCostArgs) -> Result<ExitCode> {
    let (norms, n, d) = match &args.dataset {
        Some(path) => {
            let m = load_dataset(path, args.format)
                .with_context(|| format!("loading {}", path.display()))?;
            let mode = if args.power_iteration {
                SpectralMode::PowerIteration {
                    tol: 1e-6,
                    max_iters: 200,
                }
            } else {
                SpectralMode::FrobeniusUpper
            };
            (m.norms(mode)?, m.n() as u64, m.d() as u64)
        }
        None => {
            let norms = skm_core::MatrixNorms {
                spectral_upper: args.spectral_upper.expect("clap enforces presence"),
                frobenius: args.frobenius.expect("clap enforces presence"),
                norm_21: args.norm_21.expect("clap enforces presence"),
                norm_11: args.norm_11.expect("clap enforces presence"),
                norm_2inf: args.norm_2inf.expect("clap enforces presence"),
                mode: SpectralMode::FrobeniusUpper,
            };
            (
                norms,
                args.n.expect("clap enforces presence"),
                args.d.expect("clap enforces presence"),
            )
        }
    };
    let inputs = CostInputs {
        n,
        d,
        k: args.k,
        epsilon: args.epsilon,
        tau: args.tau,
        delta: args.delta,
        qrag: args.qrag,
    };
    let mut rows = Vec::new();
    for algorithm in CostAlgorithm::ALL {
        if algorithm.needs_tau() && args.tau.is_none() {
            continue; // relaxed-label rows need a tau
        }
        rows.push(predict_cost(algorithm, &norms, &inputs)?);
    }
    let doc = json!({
        "schema": "skm-cost/1",
        "norms": norms,
        "inputs": inputs,
        "estimates": rows,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate_sampler(args: ValidateSamplerArgs) -> Result<ExitCode> {
    let m = load_dataset(&args.dataset, args.format)
        .with_context(|| format!("loading {}", args.dataset.display()))?;
    let check = check_samplers(&m, args.draws, args.seed)?;
    if check.expected_tv > args.tolerance / 2.0 {
        bail!(
            "inconclusive: {} outcomes at {} draws give an expected empirical TV of {:.4}, \
             too close to the tolerance {}; raise --draws to at least {}",
            check.outcomes,
            args.draws,
            check.expected_tv,
            args.tolerance,
            ((2.0 * check.outcomes as f64)
                / (std::f64::consts::PI * args.tolerance * args.tolerance))
                .ceil() as u64,
        );
    }
    let doc = json!({
        "schema": "skm-sampler-check/1",
        "dataset": args.dataset.display().to_string(),
        "n": m.n(),
        "d": m.d(),
        "draws": args.draws,
        "tolerance": args.tolerance,
        "expected_tv": check.expected_tv,
        "tv_column_by_norm": check.tv_column_by_norm,
        "tv_row_in_column": check.tv_row_in_column,
        "tv_entry": check.tv_entry,
        "tv_uniform": check.tv_uniform,
        "zero_mass_drawn": check.zero_mass_drawn,
        "max_tv": check.max_tv(),
        "pass": check.max_tv() <= args.tolerance && !check.zero_mass_drawn,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    print!("{text}");
    if check.max_tv() <= args.tolerance && !check.zero_mass_drawn {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::FAILURE)
    }
}

fn print_outcome(outcome: &CriterionOutcome, with_report: bool) {
    println!(
        "criterion {:02} [{}] {} :: {}",
        outcome.id,
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.name,
        outcome.summary
    );
    if with_report {
        print!("{}", outcome.report_json);
    }
}

fn cmd_acceptance(args: AcceptanceArgs) -> Result<ExitCode> {
    if let Some(id) = args.criterion {
        if !(1..=9).contains(&id) {
            return Err(anyhow!(
                "--criterion takes 1..=9 (10 is the determinism re-run)"
            ));
        }
        let outcome = match args.seed {
            Some(seed) => run_criterion(id, seed),
            None => run_criterion_default(id),
        };
        print_outcome(&outcome, args.report);
        return Ok(if outcome.pass {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        });
    }

    let mut all_pass = true;
    let mut firsts = Vec::with_capacity(9);
    for id in 1..=9 {
        let outcome = run_criterion_default(id);
        print_outcome(&outcome, args.report);
        all_pass &= outcome.pass;
        firsts.push(outcome);
    }
    let tenth = determinism_check(&firsts);
    print_outcome(&tenth, args.report);
    all_pass &= tenth.pass;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
