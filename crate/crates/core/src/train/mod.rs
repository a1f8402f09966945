//! Training loop with validation tracking.
//!
//! One epoch is `batches_per_epoch` optimizer steps on minibatches of
//! `batch_size` pairs, followed by a validation pass over `val_batches`
//! minibatches. For fixed-store regimes the store holds `simulation_budget`
//! joint draws; its last `val_batches * batch_size` rows are the validation
//! set and every epoch trains on a fresh shuffle of the rest. The
//! `fresh_joint` regime simulates new training and validation pairs each epoch.

mod checkpoint;
mod config;

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use config::TrainConfig;

use crate::diagnostics::mi_bounds_on;
use crate::loss::{self, assemble_contrastive_batch, LossConfig};
use crate::nn::{AdamState, Architecture, Mode, RatioNet, Standardizer};
use crate::posterior::{LogRatio, NetRatio};
use crate::rng::{self, streams, RngState};
use crate::tasks::{sample_joint, task_by_name, ConjugateGaussian, JointBatch, Task};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Validation `-I0`; `None` on epochs where it was not evaluated.
    pub neg_mi0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the lowest validation loss.
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// Lowest recorded validation `-I0`.
    pub fn best_neg_mi0(&self) -> Option<f64> {
        self.epochs.iter().filter_map(|e| e.neg_mi0).reduce(f64::min)
    }

    /// `-I0` at the best-validation epoch, if it was evaluated there.
    pub fn neg_mi0_at_best(&self) -> Option<f64> {
        let b = self.best_epoch?;
        self.epochs.iter().find(|e| e.epoch == b)?.neg_mi0
    }

    /// CSV with header `epoch,train_loss,val_loss,neg_mi0`; skipped `-I0` cells are empty.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "train_loss", "val_loss", "neg_mi0"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
                e.neg_mi0.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Vec<EpochRecord>> {
        let mut r = csv::Reader::from_path(path)?;
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad log row {:?}", rec)))
            };
            out.push(EpochRecord {
                epoch: num(0)? as usize,
                train_loss: num(1)?,
                val_loss: num(2)?,
                neg_mi0: rec.get(3).filter(|s| !s.is_empty()).map(|_| num(3)).transpose()?,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// State at the best-validation epoch (epoch 0 when no epoch ran).
    pub best: Checkpoint,
    /// State after the last epoch.
    pub last: Checkpoint,
    pub report: TrainReport,
}

/// The task a config refers to, with its settings applied.
pub fn resolve_task(cfg: &TrainConfig) -> Result<Arc<dyn Task>> {
    match (cfg.task.as_str(), cfg.sigma) {
        ("conjugate_gaussian", Some(s)) => Ok(Arc::new(ConjugateGaussian::new(s)?)),
        (name, _) => task_by_name(name),
    }
}

/// Validation `-I0` of a ratio on joint pairs with `m` prior draws per observation.
pub fn validate_mi0(
    ratio: &dyn LogRatio,
    task: &dyn Task,
    val: &JointBatch,
    m: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    Ok(-mi_bounds_on(ratio, task, val, m, rng)?.i0_hat)
}

/// Mean loss of `net` (eval mode) over consecutive minibatches of `val`.
fn validation_loss(
    net: &mut RatioNet,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    standardizer: &Standardizer,
    task: &dyn Task,
    val: &JointBatch,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let b = cfg.batch_size;
    let mut total = 0.0;
    let mut count = 0;
    for start in (0..val.len()).step_by(b) {
        let mb = val.slice(start, (start + b).min(val.len()));
        let (ind, dep) = assemble_contrastive_batch(&mb, cfg.regime, loss_cfg.k, Some(task), rng)?;
        let (ind, dep) = (ind.standardized(standardizer)?, dep.standardized(standardizer)?);
        total += loss::loss(net, loss_cfg, &ind, &dep)?;
        count += 1;
    }
    Ok(total / count.max(1) as f64)
}

pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_observer(cfg, |_| {})
}

/// Trains and calls `on_epoch` after every epoch.
pub fn train_with_observer(cfg: &TrainConfig, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.val_batches == 0 {
        return Err(Error::Config("at least one validation minibatch is required".into()));
    }
    let task = resolve_task(cfg)?;
    let task = task.as_ref();
    let started = Instant::now();
    let b = cfg.batch_size;
    let n_val = cfg.val_batches * b;
    let mut init_rng = rng::stream(cfg.seed, streams::INIT);
    let mut train_rng = rng::stream(cfg.seed, streams::TRAIN);
    let mut fresh_val_rng = rng::stream(cfg.seed, streams::VALIDATION);

    let (train_store, val_store) = if cfg.regime.uses_store() {
        let store = sample_joint(task, cfg.simulation_budget, &mut rng::stream(cfg.seed, streams::STORE));
        let split = store.len() - n_val;
        (Some(store.slice(0, split)), Some(store.slice(split, store.len())))
    } else {
        (None, None)
    };
    let mut pending_first = None;
    let standardizer = match &train_store {
        Some(s) => {
            let first = s.slice(0, b);
            Standardizer::fit(&first.theta, &first.x)?
        }
        None => {
            let first = sample_joint(task, b, &mut train_rng);
            let s = Standardizer::fit(&first.theta, &first.x)?;
            pending_first = Some(first);
            s
        }
    };

    let arch = Architecture::from_preset(cfg.arch, task.dim_theta(), task.dim_x());
    let mut net = RatioNet::new(arch, &mut init_rng)?;
    let mut adam = AdamState::new(net.num_params(), cfg.lr);
    let capture = |net: &RatioNet, adam: &AdamState, rng: &rng::Rng, epoch| {
        Checkpoint::capture(cfg, net, &standardizer, adam, RngState::capture(cfg.seed, rng), epoch)
    };
    let mut best = capture(&net, &adam, &train_rng, 0);
    let mut best_val: Option<f64> = None;
    let mut best_epoch: Option<usize> = None;
    let val_loss_cfg = if cfg.fixed_validation_loss {
        LossConfig::nrec(1.0, 1)?
    } else {
        cfg.loss
    };
    let mut order: Vec<usize> = (0..train_store.as_ref().map_or(0, |s| s.len())).collect();
    let mut epochs = Vec::with_capacity(cfg.max_epochs.min(100_000));

    for epoch in 1..=cfg.max_epochs {
        net.set_mode(Mode::Train);
        if train_store.is_some() {
            order.shuffle(&mut train_rng);
        }
        let mut total = 0.0;
        for i in 0..cfg.batches_per_epoch {
            let mb = match &train_store {
                Some(s) => s.select(&order[i * b..(i + 1) * b]),
                None => pending_first.take().unwrap_or_else(|| sample_joint(task, b, &mut train_rng)),
            };
            let (ind, dep) = assemble_contrastive_batch(&mb, cfg.regime, cfg.loss.k, Some(task), &mut train_rng)?;
            let (ind, dep) = (ind.standardized(&standardizer)?, dep.standardized(&standardizer)?);
            let (l, g) = loss::loss_and_grad(&mut net, &cfg.loss, &ind, &dep)?;
            adam.step(net.params_mut(), &g)?;
            total += l;
        }
        let train_loss = total / cfg.batches_per_epoch as f64;

        net.set_mode(Mode::Eval);
        // fixed stores reuse the same validation randomness every epoch
        let (val, mut vrng) = match &val_store {
            Some(v) => (v.clone(), rng::stream(cfg.seed, streams::VALIDATION)),
            None => (sample_joint(task, n_val, &mut fresh_val_rng), fresh_val_rng.clone()),
        };
        let val_loss = validation_loss(&mut net, cfg, &val_loss_cfg, &standardizer, task, &val, &mut vrng)?;
        let neg_mi0 = if cfg.mi_samples > 0 && (epoch == 1 || epoch % cfg.mi_every.max(1) == 0) {
            Some(validate_mi0(&NetRatio::new(&net, &standardizer), task, &val, cfg.mi_samples, &mut vrng)?)
        } else {
            None
        };
        if val_store.is_none() {
            fresh_val_rng = vrng;
        }
        let rec = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            neg_mi0,
        };
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5} -I0 {neg_mi0:?}");
        on_epoch(&rec);
        epochs.push(rec);
        if best_val.is_none_or(|bv| val_loss < bv) {
            best_val = Some(val_loss);
            best_epoch = Some(epoch);
            best = capture(&net, &adam, &train_rng, epoch);
        }
        if let (Some(p), Some(be)) = (cfg.patience, best_epoch) {
            if epoch - be >= p {
                log::info!("no improvement for {p} epochs; stopping at epoch {epoch}");
                break;
            }
        }
    }
    let last_epoch = epochs.last().map_or(0, |e: &EpochRecord| e.epoch);
    let last = capture(&net, &adam, &train_rng, last_epoch);
    Ok(TrainOutcome {
        best,
        last,
        report: TrainReport {
            epochs,
            best_epoch,
            best_val_loss: best_val,
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
    })
}
