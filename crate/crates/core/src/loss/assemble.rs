use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::nn::{Matrix, Standardizer};
use crate::tasks::{sample_prior, JointBatch, Task};
use crate::{Error, Result};

/// How training pairs and contrastive parameters are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// A fresh joint minibatch from the simulator every step; contrastive
    /// parameters come from that minibatch.
    FreshJoint,
    /// Pairs from a fixed store; contrastive parameters drawn from the prior.
    FreshPrior,
    /// Pairs from a fixed store; contrastive parameters reused from the minibatch.
    Bootstrap,
}

impl Regime {
    pub fn uses_store(self) -> bool {
        self != Regime::FreshJoint
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fresh_joint" => Ok(Regime::FreshJoint),
            "fresh_prior" => Ok(Regime::FreshPrior),
            "bootstrap" => Ok(Regime::Bootstrap),
            _ => Err(Error::Config(format!(
                "unknown regime {s:?}; expected fresh_joint, fresh_prior or bootstrap"
            ))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::FreshJoint => "fresh_joint",
            Regime::FreshPrior => "fresh_prior",
            Regime::Bootstrap => "bootstrap",
        })
    }
}

/// `B` observations, each with `K` candidate parameters.
///
/// `theta` holds `B * K` rows; row `b * K + k` is slot `k` of example `b`.
/// For a dependent batch, `target[b]` is the slot holding the parameter that
/// generated `x_b` (slot `K - 1` as assembled); an independent batch has no targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    theta: Matrix,
    x: Matrix,
    k: usize,
    target: Vec<usize>,
    regime: Regime,
}

impl ContrastiveBatch {
    pub fn new(theta: Matrix, x: Matrix, k: usize, target: Vec<usize>, regime: Regime) -> Result<Self> {
        if k == 0 || theta.rows() != x.rows() * k {
            return Err(Error::Shape(format!(
                "{} parameter rows cannot hold K = {k} slots for {} observations",
                theta.rows(),
                x.rows()
            )));
        }
        if !target.is_empty() && (target.len() != x.rows() || target.iter().any(|t| *t >= k)) {
            return Err(Error::Shape("targets must give one valid slot per observation".into()));
        }
        Ok(Self {
            theta,
            x,
            k,
            target,
            regime,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn batch_size(&self) -> usize {
        self.x.rows()
    }

    pub fn num_pairs(&self) -> usize {
        self.theta.rows()
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// `(B, K, dim_theta)`.
    pub fn theta_shape(&self) -> (usize, usize, usize) {
        (self.batch_size(), self.k, self.theta.cols())
    }

    /// Parameters of example `b`, one row per slot.
    pub fn slots(&self, b: usize) -> Matrix {
        let idx: Vec<usize> = (b * self.k..(b + 1) * self.k).collect();
        self.theta.select_rows(&idx)
    }

    /// Network input: each `theta` row next to its observation.
    pub fn pair_input(&self) -> Result<Matrix> {
        let dt = self.theta.cols();
        let dx = self.x.cols();
        let mut m = Matrix::zeros(self.theta.rows(), dt + dx);
        for r in 0..self.theta.rows() {
            let row = m.row_mut(r);
            row[..dt].copy_from_slice(self.theta.row(r));
            row[dt..].copy_from_slice(self.x.row(r / self.k));
        }
        Ok(m)
    }

    pub fn standardized(&self, s: &Standardizer) -> Result<Self> {
        Ok(Self {
            theta: s.apply_theta(&self.theta)?,
            x: s.apply_x(&self.x)?,
            ..self.clone()
        })
    }

    /// Reorders the slots of every example with `perm[b]` (new slot `j` takes
    /// old slot `perm[b][j]`); targets follow the generating parameter.
    pub fn permute_slots(&self, perm: &[Vec<usize>]) -> Result<Self> {
        if perm.len() != self.batch_size() || perm.iter().any(|p| p.len() != self.k) {
            return Err(Error::Shape("one permutation of K slots per example required".into()));
        }
        let mut idx = Vec::with_capacity(self.theta.rows());
        let mut target = Vec::with_capacity(self.target.len());
        for (b, p) in perm.iter().enumerate() {
            idx.extend(p.iter().map(|&j| b * self.k + j));
            if let Some(&t) = self.target.get(b) {
                let pos = p
                    .iter()
                    .position(|&j| j == t)
                    .ok_or_else(|| Error::Shape("slot permutation is not a bijection".into()))?;
                target.push(pos);
            }
        }
        Self::new(self.theta.select_rows(&idx), self.x.clone(), self.k, target, self.regime)
    }
}

/// Builds the independent and dependent batches for one minibatch of joint
/// pairs.
///
/// * `bootstrap` and `fresh_joint`: slot `k` of the independent term for
///   example `b` is `theta[(b + 1 + k) mod B]`; the dependent term uses
///   offsets `K + 1 ..= 2K - 1` for its first `K - 1` slots and the generating
///   parameter in slot `K`. No parameter is ever paired with its own `x` in a
///   contrastive slot, which needs `K <= B / 2`.
/// * `fresh_prior`: all contrastive slots are fresh prior draws (`task` required).
pub fn assemble_contrastive_batch(
    minibatch: &JointBatch,
    regime: Regime,
    k: usize,
    task: Option<&dyn Task>,
    rng: &mut dyn RngCore,
) -> Result<(ContrastiveBatch, ContrastiveBatch)> {
    let b = minibatch.len();
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let dt = minibatch.theta.cols();
    let x = minibatch.x.clone();
    let target = vec![k - 1; b];
    match regime {
        Regime::Bootstrap | Regime::FreshJoint => {
            if 2 * k > b {
                return Err(Error::Config(format!(
                    "{regime} needs K <= B/2, got K = {k} with B = {b}"
                )));
            }
            let mut ind = Vec::with_capacity(b * k);
            let mut dep = Vec::with_capacity(b * k);
            for i in 0..b {
                ind.extend((0..k).map(|j| (i + 1 + j) % b));
                dep.extend((0..k - 1).map(|j| (i + k + 1 + j) % b));
                dep.push(i);
            }
            let th = &minibatch.theta;
            Ok((
                ContrastiveBatch::new(th.select_rows(&ind), x.clone(), k, Vec::new(), regime)?,
                ContrastiveBatch::new(th.select_rows(&dep), x, k, target, regime)?,
            ))
        }
        Regime::FreshPrior => {
            let task = task.ok_or_else(|| Error::Config("fresh_prior needs the task prior".into()))?;
            if task.dim_theta() != dt {
                return Err(Error::Shape("task and minibatch disagree on dim theta".into()));
            }
            let ind = sample_prior(task, b * k, rng);
            let extra = sample_prior(task, b * (k - 1), rng);
            let mut dep = Matrix::zeros(b * k, dt);
            for i in 0..b {
                for j in 0..k - 1 {
                    dep.row_mut(i * k + j).copy_from_slice(extra.row(i * (k - 1) + j));
                }
                dep.row_mut(i * k + k - 1).copy_from_slice(minibatch.theta.row(i));
            }
            Ok((
                ContrastiveBatch::new(ind, x.clone(), k, Vec::new(), regime)?,
                ContrastiveBatch::new(dep, x, k, target, regime)?,
            ))
        }
    }
}
