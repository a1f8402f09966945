use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::loss::{LossConfig, Regime};
use crate::nn::ArchPreset;
use crate::{Error, Result};

fn default_batch_size() -> usize {
    1024
}
fn default_batches_per_epoch() -> usize {
    20
}
fn default_val_batches() -> usize {
    2
}
fn default_max_epochs() -> usize {
    1000
}
fn default_budget() -> usize {
    22_528
}
fn default_lr() -> f64 {
    5e-4
}
fn default_mi_samples() -> usize {
    128
}
fn default_mi_every() -> usize {
    1
}

/// Everything needed to reproduce a training run. Serialized as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: String,
    /// Observation noise for `conjugate_gaussian`; ignored by other tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub regime: Regime,
    pub loss: LossConfig,
    pub arch: ArchPreset,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_batches_per_epoch")]
    pub batches_per_epoch: usize,
    #[serde(default = "default_val_batches")]
    pub val_batches: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Size of the fixed simulation store; unused by `fresh_joint`.
    #[serde(default = "default_budget")]
    pub simulation_budget: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Stop after this many epochs without a new best validation loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    /// Prior draws per validation observation for the `-I0` metric; 0 disables it.
    #[serde(default = "default_mi_samples")]
    pub mi_samples: usize,
    /// Evaluate `-I0` every this many epochs (and always at epoch 1).
    #[serde(default = "default_mi_every")]
    pub mi_every: usize,
    /// Validate every model with the gamma = 1, K = 1 loss instead of its own.
    #[serde(default)]
    pub fixed_validation_loss: bool,
}

impl TrainConfig {
    /// Defaults for everything except the task, regime, loss and preset.
    pub fn new(task: &str, regime: Regime, loss: LossConfig, arch: ArchPreset) -> Self {
        Self {
            task: task.to_string(),
            sigma: None,
            regime,
            loss,
            arch,
            batch_size: default_batch_size(),
            batches_per_epoch: default_batches_per_epoch(),
            val_batches: default_val_batches(),
            max_epochs: default_max_epochs(),
            seed: 0,
            simulation_budget: default_budget(),
            lr: default_lr(),
            patience: None,
            mi_samples: default_mi_samples(),
            mi_every: default_mi_every(),
            fixed_validation_loss: false,
        }
    }

    /// Samples used by one epoch: training plus validation minibatches.
    pub fn samples_per_epoch(&self) -> usize {
        (self.batches_per_epoch + self.val_batches) * self.batch_size
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.batch_size == 0 || self.batches_per_epoch == 0 {
            return Err(Error::Config("batch size and batches per epoch must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.regime.uses_store() && self.simulation_budget < self.samples_per_epoch() {
            return Err(Error::Config(format!(
                "simulation budget {} cannot fill one epoch of {} x {} samples",
                self.simulation_budget,
                self.batches_per_epoch + self.val_batches,
                self.batch_size
            )));
        }
        if self.regime != Regime::FreshPrior && 2 * self.loss.k > self.batch_size {
            return Err(Error::Config(format!(
                "{} needs K <= B/2, got K = {} with B = {}",
                self.regime, self.loss.k, self.batch_size
            )));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let mut c = TrainConfig::new("two_moons", Regime::Bootstrap, LossConfig::nrec(2.0, 9).unwrap(), ArchPreset::Small);
        c.patience = Some(5);
        let s = c.to_toml().unwrap();
        assert_eq!(TrainConfig::from_toml(&s).unwrap(), c);
        let minimal = r#"
task = "conjugate_gaussian"
regime = "fresh_joint"
arch = "small"
[loss]
variant = "C"
gamma = 1.0
k = 1
"#;
        let m = TrainConfig::from_toml(minimal).unwrap();
        assert_eq!((m.batch_size, m.batches_per_epoch, m.val_batches), (1024, 20, 2));
        assert_eq!((m.max_epochs, m.simulation_budget, m.mi_samples), (1000, 22_528, 128));
        assert_eq!(m.simulation_budget, m.samples_per_epoch());
    }

    #[test]
    fn insufficient_budget_is_a_config_error() {
        let mut c = TrainConfig::new("two_moons", Regime::Bootstrap, LossConfig::nrea(), ArchPreset::Small);
        c.simulation_budget = 1000;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.regime = Regime::FreshJoint;
        assert!(c.validate().is_ok());
    }
}
