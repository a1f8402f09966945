use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::nn::{AdamState, Architecture, RatioNet, RunningStats, Standardizer};
use crate::posterior::Surrogate;
use crate::rng::RngState;
use crate::tasks::Task;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: u32 = 1;

/// A trained network with everything needed to evaluate or resume it.
/// Stored as JSON; floats round-trip bitwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub config: TrainConfig,
    pub arch: Architecture,
    pub params: Vec<f64>,
    pub running_stats: Vec<RunningStats>,
    pub standardizer: Standardizer,
    pub optimizer: AdamState,
    /// Position of the training stream after `epoch` epochs.
    pub rng: RngState,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn capture(
        config: &TrainConfig,
        net: &RatioNet,
        standardizer: &Standardizer,
        optimizer: &AdamState,
        rng: RngState,
        epoch: usize,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT,
            config: config.clone(),
            arch: *net.arch(),
            params: net.params().to_vec(),
            running_stats: net.running_stats().to_vec(),
            standardizer: standardizer.clone(),
            optimizer: optimizer.clone(),
            rng,
            epoch,
        }
    }

    /// The network in eval mode.
    pub fn network(&self) -> Result<RatioNet> {
        RatioNet::from_parts(self.arch, self.params.clone(), self.running_stats.clone())
    }

    pub fn surrogate(&self, task: Arc<dyn Task>) -> Result<Surrogate> {
        Surrogate::new(self.network()?, self.standardizer.clone(), task)
    }

    /// The task named in the config, with its settings.
    pub fn task(&self) -> Result<Arc<dyn Task>> {
        super::resolve_task(&self.config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unsupported checkpoint format {}", c.format)));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
