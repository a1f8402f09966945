//! Surrogate posteriors `p_w(theta|x) = exp(h_w(theta, x)) p(theta)`.

mod sampling;

use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use sampling::{
    rejection_sample, slice_sample, slice_sample_density, RejectionOutcome, Sampler, SliceSettings, SLICE_CHAINS,
};

use crate::math::logsumexp;
use crate::nn::{Mode, RatioNet, Standardizer};
use crate::tasks::{sample_prior, Task};
use crate::{Error, Matrix, Result};

/// Anything that evaluates `log r(x|theta)`.
pub trait LogRatio: Send + Sync {
    fn dim_theta(&self) -> usize;
    fn dim_x(&self) -> usize;

    /// One value per row pair `(theta_i, x_i)`.
    fn log_ratio_pairs(&self, theta: &Matrix, x: &Matrix) -> Result<Vec<f64>>;

    /// One value per row of `theta`, all against the same `x`.
    fn log_ratio_batch(&self, theta: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
        let mut xs = Matrix::zeros(theta.rows(), x.len());
        for i in 0..theta.rows() {
            xs.row_mut(i).copy_from_slice(x);
        }
        self.log_ratio_pairs(theta, &xs)
    }

    fn log_ratio(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        let t = Matrix::from_vec(1, theta.len(), theta.to_vec())?;
        Ok(self.log_ratio_batch(&t, x)?[0])
    }
}

fn check_pairs(theta: &Matrix, x: &Matrix, dt: usize, dx: usize) -> Result<()> {
    if theta.rows() != x.rows() {
        return Err(Error::Shape(format!("{} theta rows vs {} x rows", theta.rows(), x.rows())));
    }
    if theta.rows() > 0 && (theta.cols() != dt || x.cols() != dx) {
        return Err(Error::Shape(format!(
            "expected ({dt}, {dx}) columns, got ({}, {})",
            theta.cols(),
            x.cols()
        )));
    }
    Ok(())
}

/// Trained network plus the standardizer it was trained with and the task prior.
#[derive(Debug, Clone)]
pub struct Surrogate {
    net: RatioNet,
    standardizer: Standardizer,
    task: Arc<dyn Task>,
}

impl Surrogate {
    pub fn new(mut net: RatioNet, standardizer: Standardizer, task: Arc<dyn Task>) -> Result<Self> {
        if net.arch().input_dim != task.dim_theta() + task.dim_x() {
            return Err(Error::Shape(format!(
                "network input {} does not fit task {}",
                net.arch().input_dim,
                task.name()
            )));
        }
        net.set_mode(Mode::Eval);
        Ok(Self {
            net,
            standardizer,
            task,
        })
    }

    pub fn net(&self) -> &RatioNet {
        &self.net
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn task(&self) -> &Arc<dyn Task> {
        &self.task
    }
}

impl LogRatio for Surrogate {
    fn dim_theta(&self) -> usize {
        self.task.dim_theta()
    }
    fn dim_x(&self) -> usize {
        self.task.dim_x()
    }
    fn log_ratio_pairs(&self, theta: &Matrix, x: &Matrix) -> Result<Vec<f64>> {
        NetRatio::new(&self.net, &self.standardizer).log_ratio_pairs(theta, x)
    }
}

/// Borrowed view of a network and standardizer, evaluated in eval mode
/// regardless of the network's mode flag.
#[derive(Debug, Clone, Copy)]
pub struct NetRatio<'a> {
    net: &'a RatioNet,
    standardizer: &'a Standardizer,
}

impl<'a> NetRatio<'a> {
    pub fn new(net: &'a RatioNet, standardizer: &'a Standardizer) -> Self {
        Self { net, standardizer }
    }
}

impl LogRatio for NetRatio<'_> {
    fn dim_theta(&self) -> usize {
        self.standardizer.theta_mean.len()
    }
    fn dim_x(&self) -> usize {
        self.standardizer.x_mean.len()
    }
    fn log_ratio_pairs(&self, theta: &Matrix, x: &Matrix) -> Result<Vec<f64>> {
        check_pairs(theta, x, self.dim_theta(), self.dim_x())?;
        if theta.rows() == 0 {
            return Ok(Vec::new());
        }
        let (t, xs) = self.standardizer.apply(theta, x)?;
        self.net.forward_eval(&t.hstack(&xs)?)
    }
}

/// The task's exact ratio.
#[derive(Debug, Clone)]
pub struct AnalyticRatio {
    task: Arc<dyn Task>,
}

impl AnalyticRatio {
    pub fn new(task: Arc<dyn Task>) -> Result<Self> {
        let zt = vec![0.0; task.dim_theta()];
        let zx = vec![0.0; task.dim_x()];
        if task.log_ratio(&zt, &zx).is_none() {
            return Err(Error::Unsupported(format!("{} has no analytic ratio", task.name())));
        }
        Ok(Self { task })
    }
}

impl LogRatio for AnalyticRatio {
    fn dim_theta(&self) -> usize {
        self.task.dim_theta()
    }
    fn dim_x(&self) -> usize {
        self.task.dim_x()
    }
    fn log_ratio_pairs(&self, theta: &Matrix, x: &Matrix) -> Result<Vec<f64>> {
        check_pairs(theta, x, self.dim_theta(), self.dim_x())?;
        Ok((0..theta.rows())
            .map(|i| self.task.log_ratio(theta.row(i), x.row(i)).expect("checked at construction"))
            .collect())
    }
}

/// A ratio given by a closure `(theta, x) -> log r`.
pub struct FnRatio<F> {
    dim_theta: usize,
    dim_x: usize,
    f: F,
}

impl<F: Fn(&[f64], &[f64]) -> f64 + Send + Sync> FnRatio<F> {
    pub fn new(dim_theta: usize, dim_x: usize, f: F) -> Self {
        Self { dim_theta, dim_x, f }
    }
}

impl<F: Fn(&[f64], &[f64]) -> f64 + Send + Sync> LogRatio for FnRatio<F> {
    fn dim_theta(&self) -> usize {
        self.dim_theta
    }
    fn dim_x(&self) -> usize {
        self.dim_x
    }
    fn log_ratio_pairs(&self, theta: &Matrix, x: &Matrix) -> Result<Vec<f64>> {
        check_pairs(theta, x, self.dim_theta, self.dim_x)?;
        Ok((0..theta.rows()).map(|i| (self.f)(theta.row(i), x.row(i))).collect())
    }
}

/// `log r(x|theta) + log_bias(x)`: a ratio off by an `x`-dependent factor.
pub struct BiasedRatio<'a, G> {
    pub inner: &'a dyn LogRatio,
    pub log_bias: G,
}

impl<G: Fn(&[f64]) -> f64 + Send + Sync> LogRatio for BiasedRatio<'_, G> {
    fn dim_theta(&self) -> usize {
        self.inner.dim_theta()
    }
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }
    fn log_ratio_pairs(&self, theta: &Matrix, x: &Matrix) -> Result<Vec<f64>> {
        let mut v = self.inner.log_ratio_pairs(theta, x)?;
        for (i, h) in v.iter_mut().enumerate() {
            *h += (self.log_bias)(x.row(i));
        }
        Ok(v)
    }
}

/// Monte Carlo estimate of `Z(x) = E_{p(theta)}[exp h(theta, x)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub x: Vec<f64>,
    pub m: usize,
    pub z_hat: f64,
    pub log_z_hat: f64,
    pub std_error: f64,
}

const PARTITION_CHUNK: usize = 16_384;

pub fn estimate_partition(
    ratio: &dyn LogRatio,
    task: &dyn Task,
    x: &[f64],
    m: usize,
    rng: &mut dyn RngCore,
) -> Result<PartitionEstimate> {
    if m < 2 {
        return Err(Error::Config("partition estimate needs at least 2 samples".into()));
    }
    let mut h = Vec::with_capacity(m);
    let mut left = m;
    while left > 0 {
        let k = left.min(PARTITION_CHUNK);
        let theta = sample_prior(task, k, rng);
        h.extend(ratio.log_ratio_batch(&theta, x)?);
        left -= k;
    }
    let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z_hat = logsumexp(&h) - (m as f64).ln();
    // variance of exp(h), scaled by exp(max) to stay finite
    let scaled: Vec<f64> = h.iter().map(|v| (v - max).exp()).collect();
    let sd = crate::math::sample_variance(&scaled).sqrt();
    let std_error = (max + sd.ln() - 0.5 * (m as f64).ln()).exp();
    Ok(PartitionEstimate {
        x: x.to_vec(),
        m,
        z_hat: log_z_hat.exp(),
        log_z_hat,
        std_error,
    })
}
