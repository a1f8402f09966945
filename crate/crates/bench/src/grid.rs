//! Hyperparameter grids over `(task, gamma, K, arch, regime, budget, seed)`.

use std::path::Path;

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cnre_core::loss::{LossConfig, Regime};
use cnre_core::nn::ArchPreset;
use cnre_core::rng::mix_seed;
use cnre_core::train::TrainConfig;

use crate::run::{execute_run, failed_record, EvalSettings, RunRecord};

/// Training settings shared by every cell of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridBase {
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub val_batches: usize,
    pub max_epochs: usize,
    pub lr: f64,
    pub patience: Option<usize>,
    pub mi_samples: usize,
    pub mi_every: usize,
    pub fixed_validation_loss: bool,
}

impl Default for GridBase {
    fn default() -> Self {
        let d = TrainConfig::new("conjugate_gaussian", Regime::Bootstrap, LossConfig::nrea(), ArchPreset::Small);
        Self {
            batch_size: d.batch_size,
            batches_per_epoch: d.batches_per_epoch,
            val_batches: d.val_batches,
            max_epochs: d.max_epochs,
            lr: d.lr,
            patience: d.patience,
            mi_samples: d.mi_samples,
            mi_every: d.mi_every,
            fixed_validation_loss: d.fixed_validation_loss,
        }
    }
}

fn default_archs() -> Vec<ArchPreset> {
    vec![ArchPreset::Small]
}

fn default_regimes() -> Vec<Regime> {
    vec![Regime::Bootstrap]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_budgets() -> Vec<usize> {
    vec![TrainConfig::new("conjugate_gaussian", Regime::Bootstrap, LossConfig::nrea(), ArchPreset::Small).simulation_budget]
}

/// A grid experiment. Missing `archs`, `regimes`, `seeds` and `budgets`
/// default to a single small bootstrap run at seed 0 with the default budget. `gamma = inf` selects NRE-B; finite values select NRE-C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default)]
    pub tasks: Vec<String>,
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub ks: Vec<usize>,
    #[serde(default = "default_archs")]
    pub archs: Vec<ArchPreset>,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<Regime>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<usize>,
    #[serde(default)]
    pub base: GridBase,
    #[serde(default)]
    pub eval: EvalSettings,
}

/// One grid cell with its replicate seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub index: usize,
    pub seed: u64,
    pub config: TrainConfig,
}

impl GridSpec {
    pub fn from_toml(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Every cell in a fixed order. Cell `i` trains with seed `mix_seed(seed, i)`.
    /// Fails if any cell is invalid (for instance `K > B/2` in a shifted regime).
    pub fn cells(&self) -> Result<Vec<GridCell>> {
        let mut out = Vec::new();
        for task in &self.tasks {
            for &gamma in &self.gammas {
                for &k in &self.ks {
                    for &arch in &self.archs {
                        for &regime in &self.regimes {
                            for &budget in &self.budgets {
                                for &seed in &self.seeds {
                                    let loss = if gamma.is_infinite() && gamma > 0.0 {
                                        LossConfig::nreb(k)?
                                    } else {
                                        LossConfig::nrec(gamma, k)?
                                    };
                                    let mut c = TrainConfig::new(task, regime, loss, arch);
                                    let b = &self.base;
                                    c.batch_size = b.batch_size;
                                    c.batches_per_epoch = b.batches_per_epoch;
                                    c.val_batches = b.val_batches;
                                    c.max_epochs = b.max_epochs;
                                    c.lr = b.lr;
                                    c.patience = b.patience;
                                    c.mi_samples = b.mi_samples;
                                    c.mi_every = b.mi_every;
                                    c.fixed_validation_loss = b.fixed_validation_loss;
                                    c.simulation_budget = budget;
                                    let index = out.len();
                                    c.seed = mix_seed(seed, index as u64);
                                    if let Err(e) = c.validate() {
                                        bail!("grid cell {index} ({task}, gamma {gamma}, K {k}, {regime}): {e}");
                                    }
                                    out.push(GridCell { index, seed, config: c });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    /// One record per cell, in cell order; failed cells carry `error`.
    pub records: Vec<RunRecord>,
}

impl GridOutcome {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Runs every cell with at most `jobs` cells in parallel. Run directories go
/// under `out_root/runs/` when a root is given. A failing cell is recorded and
/// the grid continues.
pub fn run_grid(spec: &GridSpec, jobs: usize, out_root: Option<&Path>) -> Result<GridOutcome> {
    let cells = spec.cells()?;
    let runs_dir = out_root.map(|r| r.join("runs"));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let records = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                log::info!("grid cell {} of {}", cell.index + 1, cells.len());
                let mut rec = execute_run(&cell.config, &spec.eval, runs_dir.as_deref()).unwrap_or_else(|e| {
                    log::error!("grid cell {} failed: {e:#}", cell.index);
                    failed_record(&cell.config, &spec.eval, &e)
                });
                rec.seed = cell.seed;
                rec.cell_index = Some(cell.index);
                if let (None, Some(root)) = (&rec.artifacts.dir, &runs_dir) {
                    let dir = root.join(&rec.id);
                    if std::fs::create_dir_all(&dir).is_ok() {
                        rec.artifacts.dir = Some(dir);
                    }
                }
                if let Some(dir) = &rec.artifacts.dir {
                    if let Err(e) = rec.save(&dir.join("record.json")) {
                        log::error!("could not rewrite record for cell {}: {e:#}", cell.index);
                    }
                }
                rec
            })
            .collect::<Vec<_>>()
    });
    Ok(GridOutcome { records })
}
