//! One training run, its evaluation and its files on disk.
//!
//! A run directory holds `config.toml`, `checkpoint.json` (best-validation
//! state), `log.csv`, `diagnostics.json` and `record.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use cnre_core::diagnostics::{
    benchmark_observations, importance_diagnostic, mi_bounds, observations, posterior_c2st, DiagnosticsReport, ZHatStats,
};
use cnre_core::posterior::{estimate_partition, Sampler};
use cnre_core::rng::{self, streams};
use cnre_core::train::{train, Checkpoint, TrainConfig, TrainReport};

/// How a trained surrogate is evaluated after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    /// Benchmark observations used for C2ST; 0 disables it.
    pub c2st_observations: usize,
    /// Posterior draws per side of each C2ST.
    pub posterior_samples: usize,
    pub sampler: Sampler,
    /// Observations at which the partition function is estimated.
    pub z_observations: usize,
    /// Prior draws per partition estimate.
    pub z_samples: usize,
    /// Samples per class of the importance-sampling diagnostic; 0 disables it.
    pub importance_n_per_class: usize,
    /// Joint pairs and prior draws per pair of the mutual-information bounds; `mi_n = 0` disables them.
    pub mi_n: usize,
    pub mi_m: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            c2st_observations: 10,
            posterior_samples: 1000,
            sampler: Sampler::Auto,
            z_observations: 10,
            z_samples: 10_000,
            importance_n_per_class: 1000,
            mi_n: 1000,
            mi_m: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    /// Lowest validation `-I0` over all evaluated epochs.
    pub neg_mi0_best: Option<f64>,
    pub neg_mi0_at_best: Option<f64>,
    /// One accuracy per benchmark observation.
    pub c2st: Vec<f64>,
    pub c2st_mean: Option<f64>,
    pub z_hat: Option<ZHatStats>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub dir: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub version: String,
    /// Replicate seed the run was derived from; the training seed is `config.seed`.
    pub seed: u64,
    pub cell_index: Option<usize>,
    pub config: TrainConfig,
    pub eval: EvalSettings,
    pub metrics: Option<RunMetrics>,
    /// Set when the run failed.
    pub error: Option<String>,
    pub artifacts: Artifacts,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Directory-friendly run name built from the configuration.
pub fn run_id(cfg: &TrainConfig) -> String {
    format!(
        "{}-{}-g{}-k{}-{}-{}-n{}-s{}",
        cfg.task,
        cfg.loss.variant,
        cfg.loss.gamma_label(),
        cfg.loss.k,
        cfg.arch,
        cfg.regime,
        cfg.simulation_budget,
        cfg.seed
    )
    .to_lowercase()
}

/// Diagnostics of a checkpoint. Every part uses its own stream derived from
/// the checkpoint's seed, so reruns are bitwise identical.
pub fn evaluate_checkpoint(ck: &Checkpoint, eval: &EvalSettings) -> Result<DiagnosticsReport> {
    let task = ck.task()?;
    let t = task.as_ref();
    let surrogate = ck.surrogate(task.clone())?;
    let seed = ck.config.seed;
    let part = |i: u64| rng::stream(rng::mix_seed(seed, i), streams::DIAGNOSTICS);

    let mut zr = part(0);
    let z_hat = if eval.z_observations > 0 {
        observations(t, eval.z_observations, seed)
            .iter()
            .map(|o| estimate_partition(&surrogate, t, &o.x, eval.z_samples, &mut zr))
            .collect::<cnre_core::Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mi = if eval.mi_n > 0 {
        Some(mi_bounds(&surrogate, t, eval.mi_n, eval.mi_m, &mut part(1))?)
    } else {
        None
    };

    let importance = if eval.importance_n_per_class > 0 {
        let mut r = part(2);
        let mut theta = vec![0.0; t.dim_theta()];
        t.prior_draw(&mut r, &mut theta);
        Some(importance_diagnostic(&surrogate, t, &theta, eval.importance_n_per_class, &mut r)?)
    } else {
        None
    };

    let (obs, c2st) = if eval.c2st_observations > 0 && t.has_reference_posterior() {
        let obs = benchmark_observations(t, eval.c2st_observations);
        let acc = obs
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let mut r = rng::stream(rng::mix_seed(seed, i as u64), streams::SAMPLING);
                posterior_c2st(&surrogate, t, &o.x, eval.posterior_samples, eval.sampler, &mut r)
            })
            .collect::<cnre_core::Result<Vec<_>>>()?;
        (obs, Some(acc))
    } else {
        (Vec::new(), None)
    };
    Ok(DiagnosticsReport {
        task: t.name().to_string(),
        seed,
        theta: importance.as_ref().map(|d| d.theta.clone()),
        auc: importance.as_ref().map(|d| d.weighted.auc),
        power_auc: importance.as_ref().map(|d| d.power.auc),
        roc_points: importance.as_ref().map(|d| d.weighted.points()).unwrap_or_default(),
        i0_hat: mi.as_ref().map(|m| m.i0_hat),
        i1_hat: mi.as_ref().map(|m| m.i1_hat),
        z_hat_stats: ZHatStats::from_estimates(&z_hat),
        z_hat,
        observations: obs,
        c2st,
        version: crate::VERSION.to_string(),
    })
}

fn metrics(report: &TrainReport, diag: &DiagnosticsReport) -> RunMetrics {
    let c2st = diag.c2st.clone().unwrap_or_default();
    RunMetrics {
        epochs_run: report.epochs.len(),
        best_epoch: report.best_epoch,
        best_val_loss: report.best_val_loss,
        neg_mi0_best: report.best_neg_mi0(),
        neg_mi0_at_best: report.neg_mi0_at_best(),
        c2st_mean: (!c2st.is_empty()).then(|| c2st.iter().sum::<f64>() / c2st.len() as f64),
        c2st,
        z_hat: diag.z_hat_stats.clone(),
        wall_time_secs: report.wall_time_secs,
    }
}

/// Trains, evaluates and (with `out_root`) writes `out_root/<id>/`.
pub fn execute_run(cfg: &TrainConfig, eval: &EvalSettings, out_root: Option<&Path>) -> Result<RunRecord> {
    let id = run_id(cfg);
    let outcome = train(cfg)?;
    let diag = evaluate_checkpoint(&outcome.best, eval)?;
    let mut record = RunRecord {
        id: id.clone(),
        version: crate::VERSION.to_string(),
        seed: cfg.seed,
        cell_index: None,
        config: cfg.clone(),
        eval: eval.clone(),
        metrics: Some(metrics(&outcome.report, &diag)),
        error: None,
        artifacts: Artifacts::default(),
    };
    if let Some(root) = out_root {
        let dir = root.join(&id);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let a = Artifacts {
            config: Some(dir.join("config.toml")),
            checkpoint: Some(dir.join("checkpoint.json")),
            log: Some(dir.join("log.csv")),
            diagnostics: Some(dir.join("diagnostics.json")),
            dir: Some(dir.clone()),
        };
        cfg.save(a.config.as_deref().unwrap())?;
        outcome.best.save(a.checkpoint.as_deref().unwrap())?;
        outcome.report.write_csv(a.log.as_deref().unwrap())?;
        fs::write(a.diagnostics.as_deref().unwrap(), serde_json::to_string_pretty(&diag)?)?;
        record.artifacts = a;
        record.save(&dir.join("record.json"))?;
    }
    Ok(record)
}

/// A record for a run that failed before producing metrics.
pub fn failed_record(cfg: &TrainConfig, eval: &EvalSettings, err: &anyhow::Error) -> RunRecord {
    RunRecord {
        id: run_id(cfg),
        version: crate::VERSION.to_string(),
        seed: cfg.seed,
        cell_index: None,
        config: cfg.clone(),
        eval: eval.clone(),
        metrics: None,
        error: Some(format!("{err:#}")),
        artifacts: Artifacts::default(),
    }
}
