//! Verification tools for trained ratio estimators.

mod c2st;
mod importance;
mod mi;
mod posterior_check;
mod roc;

use serde::{Deserialize, Serialize};

pub use c2st::{c2st, c2st_with, C2stConfig};
pub use importance::{importance_diagnostic, nreb_illposedness_demo, IllPosedness, ImportanceDiagnostic};
pub use mi::{mi_bounds, mi_bounds_on, MIBoundReport};
pub use posterior_check::{
    benchmark_observations, observations, posterior_c2st, Observation, BENCHMARK_OBSERVATION_SEED,
};
pub use roc::{roc_curve, RocReport};

use crate::posterior::PartitionEstimate;

/// Summary statistics of a set of partition-function estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZHatStats {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
}

impl ZHatStats {
    pub fn from_estimates(est: &[PartitionEstimate]) -> Option<Self> {
        if est.is_empty() {
            return None;
        }
        let mut z: Vec<f64> = est.iter().map(|e| e.z_hat).collect();
        z.sort_by(f64::total_cmp);
        let n = z.len();
        let median = if n % 2 == 1 {
            z[n / 2]
        } else {
            0.5 * (z[n / 2 - 1] + z[n / 2])
        };
        Some(Self {
            count: n,
            min: z[0],
            median,
            max: z[n - 1],
            mean: z.iter().sum::<f64>() / n as f64,
        })
    }
}

/// Everything `diagnose` reports for one surrogate. Parts that were not
/// requested are `None` or empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub task: String,
    pub seed: u64,
    /// Parameter of the importance-sampling diagnostic.
    pub theta: Option<Vec<f64>>,
    pub auc: Option<f64>,
    pub power_auc: Option<f64>,
    pub roc_points: Vec<(f64, f64)>,
    pub i0_hat: Option<f64>,
    pub i1_hat: Option<f64>,
    pub z_hat_stats: Option<ZHatStats>,
    pub z_hat: Vec<PartitionEstimate>,
    /// Observations the C2ST values refer to.
    pub observations: Vec<Observation>,
    pub c2st: Option<Vec<f64>>,
    pub version: String,
}
