//! Priors, simulators and reference posteriors.
//!
//! | name | dim theta | dim x | prior |
//! |---|---|---|---|
//! | `conjugate_gaussian` | 1 | 1 | N(0, 1) |
//! | `gaussian_linear` | 10 | 10 | N(0, 0.1 I) |
//! | `gaussian_linear_uniform` | 10 | 10 | U(-1, 1)^10 |
//! | `gaussian_mixture` | 2 | 2 | U(-10, 10)^2 |
//! | `two_moons` | 2 | 2 | U(-1, 1)^2 |
//! | `slcp` | 5 | 8 | U(-3, 3)^5 |
//!
//! Equations for each simulator are documented on its type.

mod gaussian;
mod io;
mod slcp;
mod two_moons;

use std::sync::Arc;

use rand::RngCore;

pub use gaussian::{ConjugateGaussian, GaussianLinear, GaussianLinearUniform, GaussianMixture};
pub use io::{read_joint_csv, write_joint_csv, write_matrix_csv, read_matrix_csv};
pub use slcp::Slcp;
pub use two_moons::TwoMoons;

use crate::{Error, Matrix, Result};

pub const TASK_NAMES: [&str; 6] = [
    "conjugate_gaussian",
    "gaussian_linear",
    "gaussian_linear_uniform",
    "gaussian_mixture",
    "two_moons",
    "slcp",
];

pub trait Task: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;
    fn dim_theta(&self) -> usize;
    fn dim_x(&self) -> usize;

    /// Draws one parameter vector into `out`.
    fn prior_draw(&self, rng: &mut dyn RngCore, out: &mut [f64]);

    /// `log p(theta)`; `-inf` outside the support.
    fn prior_log_density(&self, theta: &[f64]) -> f64;

    /// Per-coordinate prior standard deviation.
    fn prior_std(&self) -> Vec<f64>;

    /// Draws one observation for `theta` into `out`.
    fn simulate_one(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]);

    /// Exact `log p(x|theta) - log p(x)`, when available.
    fn log_ratio(&self, _theta: &[f64], _x: &[f64]) -> Option<f64> {
        None
    }

    /// Exact `log p(x|theta)`, when available.
    fn log_likelihood(&self, _theta: &[f64], _x: &[f64]) -> Option<f64> {
        None
    }

    fn has_reference_posterior(&self) -> bool {
        false
    }

    /// Draws from the exact posterior `p(theta|x)`.
    fn reference_posterior(&self, _x: &[f64], _n: usize, _rng: &mut dyn RngCore) -> Result<Matrix> {
        Err(Error::Unsupported(format!("{} has no reference posterior", self.name())))
    }
}

/// Looks a task up by name, with default settings.
pub fn task_by_name(name: &str) -> Result<Arc<dyn Task>> {
    Ok(match name {
        "conjugate_gaussian" => Arc::new(ConjugateGaussian::default()),
        "gaussian_linear" => Arc::new(GaussianLinear),
        "gaussian_linear_uniform" => Arc::new(GaussianLinearUniform),
        "gaussian_mixture" => Arc::new(GaussianMixture),
        "two_moons" => Arc::new(TwoMoons),
        "slcp" => Arc::new(Slcp),
        other => {
            return Err(Error::Config(format!(
                "unknown task {other:?}; expected one of {}",
                TASK_NAMES.join(", ")
            )))
        }
    })
}

/// Paired draws from the joint: row `i` of `theta` generated row `i` of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBatch {
    pub theta: Matrix,
    pub x: Matrix,
}

impl JointBatch {
    pub fn len(&self) -> usize {
        self.theta.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.rows() == 0
    }

    pub fn select(&self, idx: &[usize]) -> JointBatch {
        JointBatch {
            theta: self.theta.select_rows(idx),
            x: self.x.select_rows(idx),
        }
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> JointBatch {
        let idx: Vec<usize> = (start..end).collect();
        self.select(&idx)
    }
}

pub fn sample_prior(task: &dyn Task, n: usize, rng: &mut dyn RngCore) -> Matrix {
    let d = task.dim_theta();
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        task.prior_draw(rng, m.row_mut(i));
    }
    m
}

pub fn simulate(task: &dyn Task, theta: &Matrix, rng: &mut dyn RngCore) -> Result<Matrix> {
    if theta.rows() > 0 && theta.cols() != task.dim_theta() {
        return Err(Error::Shape(format!(
            "{} expects {} parameter columns, got {}",
            task.name(),
            task.dim_theta(),
            theta.cols()
        )));
    }
    let mut x = Matrix::zeros(theta.rows(), task.dim_x());
    for i in 0..theta.rows() {
        task.simulate_one(theta.row(i), rng, x.row_mut(i));
    }
    Ok(x)
}

pub fn sample_joint(task: &dyn Task, n: usize, rng: &mut dyn RngCore) -> JointBatch {
    let theta = sample_prior(task, n, rng);
    let x = simulate(task, &theta, rng).expect("prior draws have the task's dimension");
    JointBatch { theta, x }
}

pub fn analytic_log_ratio(task: &dyn Task, theta: &[f64], x: &[f64]) -> Result<f64> {
    if theta.len() != task.dim_theta() || x.len() != task.dim_x() {
        return Err(Error::Shape(format!(
            "{} expects ({}, {}) dimensions",
            task.name(),
            task.dim_theta(),
            task.dim_x()
        )));
    }
    task.log_ratio(theta, x)
        .ok_or_else(|| Error::Unsupported(format!("{} has no analytic ratio", task.name())))
}

/// Shared helpers for box-uniform priors.
pub(crate) fn uniform_box_draw(lo: f64, hi: f64, rng: &mut dyn RngCore, out: &mut [f64]) {
    use rand::Rng;
    for v in out {
        *v = rng.random_range(lo..hi);
    }
}

pub(crate) fn uniform_box_log_density(lo: f64, hi: f64, theta: &[f64]) -> f64 {
    if theta.iter().all(|t| (lo..=hi).contains(t)) {
        -(theta.len() as f64) * (hi - lo).ln()
    } else {
        f64::NEG_INFINITY
    }
}

pub(crate) fn std_normal(rng: &mut dyn RngCore) -> f64 {
    use rand_distr::Distribution;
    rand_distr::StandardNormal.sample(rng)
}

/// Draws from `N(mean, sd^2)` truncated to `[lo, hi]`.
///
/// Intervals reaching within three standard deviations of the mode invert the
/// CDF on the side nearer the mode; deeper tails use exponential rejection.
pub(crate) fn truncated_normal(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut dyn RngCore) -> f64 {
    use rand::Rng;
    use rand_distr::{Distribution, Exp1};
    use statrs::distribution::{ContinuousCDF, Normal};
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    // mirror so the interval never lies entirely left of the mode
    let (a, b, flip) = if b <= 0.0 { (-b, -a, true) } else { (a, b, false) };
    let z = if a > 3.0 {
        let rate = 0.5 * (a + (a * a + 4.0).sqrt());
        loop {
            let e: f64 = Exp1.sample(rng);
            let z = a + e / rate;
            if z <= b && rng.random::<f64>().ln() <= -0.5 * (z - rate) * (z - rate) {
                break z;
            }
        }
    } else {
        let std = Normal::standard();
        // upper-tail form keeps precision for intervals right of the mode
        let (pa, pb) = (std.sf(a), std.sf(b));
        let u = pb + rng.random::<f64>() * (pa - pb);
        (-std.inverse_cdf(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))).clamp(a, b)
    };
    mean + sd * if flip { -z } else { z }
}

/// Probability mass of `N(mean, sd^2)` inside `[lo, hi]`.
pub(crate) fn normal_mass(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let std = Normal::standard();
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    if a > 0.0 {
        std.cdf(-a) - std.cdf(-b)
    } else {
        std.cdf(b) - std.cdf(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn registry_round_trip() {
        for name in TASK_NAMES {
            let t = task_by_name(name).unwrap();
            assert_eq!(t.name(), name);
            let mut r = rng::stream(1, 0);
            let b = sample_joint(t.as_ref(), 3, &mut r);
            assert_eq!(b.theta.shape(), (3, t.dim_theta()));
            assert_eq!(b.x.shape(), (3, t.dim_x()));
            assert!(b.theta.all_finite() && b.x.all_finite());
            for i in 0..3 {
                assert!(t.prior_log_density(b.theta.row(i)).is_finite());
            }
        }
        assert!(matches!(task_by_name("lotka_volterra"), Err(Error::Config(_))));
    }

    #[test]
    fn empty_joint_batch() {
        let t = task_by_name("two_moons").unwrap();
        let b = sample_joint(t.as_ref(), 0, &mut rng::stream(1, 0));
        assert!(b.is_empty());
    }

    #[test]
    fn truncated_normal_stays_inside_far_tails() {
        // deep in the tail the truncated law is close to 1 - Exp(rate ~ 29)
        let mut r = rng::stream(3, 0);
        let n = 20_000;
        let (mut up, mut down) = (0.0, 0.0);
        for _ in 0..n {
            let v = truncated_normal(30.0, 1.0, -1.0, 1.0, &mut r);
            assert!((-1.0..=1.0).contains(&v) && v > 0.5);
            up += v;
            let v = truncated_normal(-30.0, 1.0, -1.0, 1.0, &mut r);
            assert!((-1.0..=1.0).contains(&v) && v < -0.5);
            down += v;
        }
        let expect = 1.0 - 1.0 / 29.03;
        assert!((up / n as f64 - expect).abs() < 0.002);
        assert!((down / n as f64 + expect).abs() < 0.002);
    }

    #[test]
    fn truncated_normal_moments() {
        // N(0,1) truncated to [0, inf) has mean sqrt(2/pi)
        let mut r = rng::stream(4, 0);
        let n = 100_000;
        let m: f64 = (0..n).map(|_| truncated_normal(0.0, 1.0, 0.0, 50.0, &mut r)).sum::<f64>() / n as f64;
        assert!((m - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.01);
    }

    #[test]
    fn analytic_ratio_is_unsupported_elsewhere() {
        let t = task_by_name("two_moons").unwrap();
        assert!(matches!(
            analytic_log_ratio(t.as_ref(), &[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::Unsupported(_))
        ));
    }
}
