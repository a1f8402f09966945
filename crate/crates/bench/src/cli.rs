//! The `cnre` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cnre_core::diagnostics::{benchmark_observations, c2st};
use cnre_core::loss::{LossConfig, Regime, Variant};
use cnre_core::nn::ArchPreset;
use cnre_core::posterior::Sampler;
use cnre_core::rng::{self, streams};
use cnre_core::tasks::{read_matrix_csv, sample_joint, write_joint_csv, write_matrix_csv, ConjugateGaussian, Task};
use cnre_core::train::{resolve_task, Checkpoint, TrainConfig};

use crate::grid::{run_grid, GridSpec};
use crate::report::{self, c2st_mi_correlation, figure_table};
use crate::run::{evaluate_checkpoint, execute_run, EvalSettings};

#[derive(Debug, Parser)]
#[command(name = "cnre", version, about = "Contrastive neural ratio estimation experiments")]
pub struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file: a training config for `train`, a grid spec for `grid`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw joint (theta, x) pairs from a task and write them as CSV.
    Simulate(SimulateArgs),
    /// Train a ratio estimator; writes config, checkpoint and log under --out.
    Train(TrainArgs),
    /// Draw from a trained surrogate posterior.
    Sample(SampleArgs),
    /// Diagnostics of a checkpoint as a JSON report.
    Diagnose(DiagnoseArgs),
    /// Run a hyperparameter grid from a TOML spec.
    Grid(GridArgs),
    /// Summarize run records into CSV tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub task: String,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub task: Option<String>,
    /// Observation noise of `conjugate_gaussian`.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Loss family: a, b or c. Defaults to c, or b when --gamma is inf.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Odds of dependent against independent pairs; `inf` selects NRE-B.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub arch: Option<ArchPreset>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub batches_per_epoch: Option<usize>,
    #[arg(long)]
    pub val_batches: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub mi_samples: Option<usize>,
    #[arg(long)]
    pub mi_every: Option<usize>,
    /// Validate every model with the NRE-C loss at gamma = 1, K = 1.
    #[arg(long)]
    pub fixed_val_loss: bool,
    /// Benchmark observations to run C2ST on after training.
    #[arg(long, default_value_t = 0)]
    pub c2st_observations: usize,
    /// Partition estimates to compute after training.
    #[arg(long, default_value_t = 0)]
    pub z_observations: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Observation as comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "observation")]
    pub x: Option<Vec<f64>>,
    /// Index into the task's benchmark observations.
    #[arg(long)]
    pub observation: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value = "auto")]
    pub sampler: Sampler,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Task to check against; must match the checkpoint.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, default_value_t = EvalSettings::default().importance_n_per_class)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = EvalSettings::default().mi_n)]
    pub mi_n: usize,
    #[arg(long, default_value_t = EvalSettings::default().mi_m)]
    pub mi_m: usize,
    #[arg(long, default_value_t = EvalSettings::default().z_observations)]
    pub z_observations: usize,
    #[arg(long, default_value_t = EvalSettings::default().z_samples)]
    pub z_samples: usize,
    /// Benchmark observations compared against the task's reference posterior.
    #[arg(long, default_value_t = 0)]
    pub c2st_observations: usize,
    #[arg(long, default_value_t = EvalSettings::default().posterior_samples)]
    pub posterior_samples: usize,
    #[arg(long, default_value = "auto")]
    pub sampler: Sampler,
    /// CSV of reference posterior samples at --x, compared by C2ST.
    #[arg(long, requires = "x")]
    pub reference: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Cells run in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched for `record.json` files.
    #[arg(long, conflicts_with = "summary")]
    pub runs: Option<PathBuf>,
    /// An existing `grid_summary.csv` to re-aggregate.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on any other error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::Sample(a) => sample(cli, a),
        Command::Diagnose(a) => diagnose(cli, a),
        Command::Grid(a) => grid(cli, a),
        Command::Report(a) => report_cmd(cli, a),
    }
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let task: std::sync::Arc<dyn Task> = match (a.task.as_str(), a.sigma) {
        ("conjugate_gaussian", Some(s)) => std::sync::Arc::new(ConjugateGaussian::new(s)?),
        (name, _) => cnre_core::tasks::task_by_name(name)?,
    };
    let mut r = rng::stream(cli.seed.unwrap_or(0), streams::STORE);
    let joint = sample_joint(task.as_ref(), a.n, &mut r);
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", a.task)));
    write_joint_csv(&out, &joint)?;
    println!("{}", out.display());
    Ok(())
}

/// The training config from `--config` (if any) with command-line overrides applied.
pub fn build_train_config(cli: &Cli, a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &cli.config {
        Some(p) => TrainConfig::load(p)?,
        None => {
            let task = a.task.as_deref().ok_or_else(|| anyhow!("--task is required without --config"))?;
            TrainConfig::new(task, Regime::Bootstrap, LossConfig::nrec(1.0, 1)?, ArchPreset::Small)
        }
    };
    if let Some(t) = &a.task {
        cfg.task = t.clone();
    }
    if a.sigma.is_some() {
        cfg.sigma = a.sigma;
    }
    if a.variant.is_some() || a.gamma.is_some() || a.k.is_some() {
        let gamma = a.gamma.unwrap_or(cfg.loss.gamma);
        let k = a.k.unwrap_or(cfg.loss.k);
        let variant = match a.variant {
            Some(v) => v,
            None if gamma.is_infinite() => Variant::B,
            None if a.gamma.is_some() => Variant::C,
            None => cfg.loss.variant,
        };
        cfg.loss = match variant {
            Variant::A => {
                if k != 1 {
                    bail!("NRE-A uses K = 1");
                }
                LossConfig::nrea()
            }
            Variant::B => LossConfig::nreb(k)?,
            Variant::C => LossConfig::nrec(gamma, k)?,
        };
    }
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                cfg.$field = v;
            }
        };
    }
    set!(regime, a.regime);
    set!(arch, a.arch);
    set!(max_epochs, a.epochs);
    set!(batch_size, a.batch_size);
    set!(batches_per_epoch, a.batches_per_epoch);
    set!(val_batches, a.val_batches);
    set!(simulation_budget, a.budget);
    set!(lr, a.lr);
    set!(mi_samples, a.mi_samples);
    set!(mi_every, a.mi_every);
    set!(seed, cli.seed);
    if a.patience.is_some() {
        cfg.patience = a.patience;
    }
    if a.fixed_val_loss {
        cfg.fixed_validation_loss = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let cfg = build_train_config(cli, a)?;
    let eval = EvalSettings {
        c2st_observations: a.c2st_observations,
        z_observations: a.z_observations,
        importance_n_per_class: 0,
        mi_n: 0,
        ..EvalSettings::default()
    };
    let root = cli.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let rec = execute_run(&cfg, &eval, Some(&root))?;
    let m = rec.metrics.as_ref().expect("successful runs carry metrics");
    println!(
        "{}: {} epochs, best epoch {:?}, best validation loss {:?}",
        rec.id, m.epochs_run, m.best_epoch, m.best_val_loss
    );
    if let Some(dir) = &rec.artifacts.dir {
        println!("{}", dir.display());
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn sample(cli: &Cli, a: &SampleArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let task = ck.task()?;
    let x = match (&a.x, a.observation) {
        (Some(x), _) => x.clone(),
        (None, Some(i)) => benchmark_observations(task.as_ref(), i + 1).pop().expect("i + 1 observations").x,
        (None, None) => bail!("either --x or --observation is required"),
    };
    if x.len() != task.dim_x() {
        bail!("{} expects observations of dimension {}", task.name(), task.dim_x());
    }
    let surrogate = ck.surrogate(task.clone())?;
    let mut r = rng::stream(cli.seed.unwrap_or(ck.config.seed), streams::SAMPLING);
    let samples = a.sampler.sample(&surrogate, task.as_ref(), &x, a.n, &mut r)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("samples.csv"));
    write_matrix_csv(&out, &samples, "theta")?;
    println!("{}", out.display());
    Ok(())
}

fn diagnose(cli: &Cli, a: &DiagnoseArgs) -> Result<()> {
    let mut ck = load_checkpoint(&a.checkpoint)?;
    if let Some(t) = &a.task {
        if *t != ck.config.task {
            bail!("checkpoint was trained on {}, not {t}", ck.config.task);
        }
    }
    if let Some(s) = cli.seed {
        ck.config.seed = s;
    }
    let eval = EvalSettings {
        c2st_observations: a.c2st_observations,
        posterior_samples: a.posterior_samples,
        sampler: a.sampler,
        z_observations: a.z_observations,
        z_samples: a.z_samples,
        importance_n_per_class: a.n_per_class,
        mi_n: a.mi_n,
        mi_m: a.mi_m,
    };
    let mut report = evaluate_checkpoint(&ck, &eval)?;
    if let (Some(path), Some(x)) = (&a.reference, &a.x) {
        let task = resolve_task(&ck.config)?;
        let reference = read_matrix_csv(path)?;
        let surrogate = ck.surrogate(task.clone())?;
        let mut r = rng::stream(ck.config.seed, streams::SAMPLING);
        let samples = a.sampler.sample(&surrogate, task.as_ref(), x, reference.rows(), &mut r)?;
        let acc = c2st(&reference, &samples, &mut r)?;
        report.c2st.get_or_insert_with(Vec::new).push(acc);
        report.observations.push(cnre_core::diagnostics::Observation {
            theta: Vec::new(),
            x: x.clone(),
        });
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| a.checkpoint.with_file_name("diagnostics.json"));
    std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
    println!("{}", out.display());
    Ok(())
}

fn grid(cli: &Cli, a: &GridArgs) -> Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| anyhow!("grid needs --config <spec.toml>"))?;
    let mut spec = GridSpec::load(path)?;
    if let Some(s) = cli.seed {
        spec.seeds = vec![s];
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("grid"));
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("grid.toml"), spec.to_toml()?)?;
    let outcome = run_grid(&spec, a.jobs, Some(&out))?;
    let rows = report::aggregate(&outcome.records);
    let summary = out.join("grid_summary.csv");
    report::write_rows(&summary, &rows)?;
    println!(
        "{} cells, {} failed; summary in {}",
        outcome.records.len(),
        outcome.failures(),
        summary.display()
    );
    Ok(())
}

fn report_cmd(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let rows = match (&a.runs, &a.summary) {
        (Some(dir), _) => report::aggregate(&report::load_records(dir)?),
        (None, Some(p)) => report::reaggregate(&report::read_summary(p)?),
        (None, None) => bail!("report needs --runs <dir> or --summary <csv>"),
    };
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("report"));
    std::fs::create_dir_all(&out)?;
    report::write_rows(&out.join("grid_summary.csv"), &rows)?;
    report::write_rows(&out.join("figure_table.csv"), &figure_table(&rows))?;
    match c2st_mi_correlation(&rows) {
        Some((rho, n)) => println!("spearman(c2st_mean, neg_mi0_best) = {rho:.3} over {n} runs"),
        None => println!("too few runs with both C2ST and -I0 for a correlation"),
    }
    println!("{}", out.display());
    Ok(())
}
