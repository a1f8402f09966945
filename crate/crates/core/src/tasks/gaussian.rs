use rand::RngCore;

use super::{normal_mass, std_normal, truncated_normal, uniform_box_draw, uniform_box_log_density, Task};
use crate::math::normal_log_pdf;
use crate::{Error, Matrix, Result};

/// `theta ~ N(0, 1)`, `x | theta ~ N(theta, sigma^2)`.
///
/// Marginal `x ~ N(0, 1 + sigma^2)`, posterior
/// `N(x / (1 + sigma^2), sigma^2 / (1 + sigma^2))`, and mutual information
/// `0.5 * ln(1 + 1 / sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateGaussian {
    pub sigma: f64,
}

impl Default for ConjugateGaussian {
    fn default() -> Self {
        Self { sigma: 1.0 }
    }
}

impl ConjugateGaussian {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn mutual_information(&self) -> f64 {
        0.5 * (1.0 + 1.0 / (self.sigma * self.sigma)).ln()
    }

    pub fn posterior_mean_var(&self, x: f64) -> (f64, f64) {
        let s2 = self.sigma * self.sigma;
        (x / (1.0 + s2), s2 / (1.0 + s2))
    }

    pub fn marginal_var(&self) -> f64 {
        1.0 + self.sigma * self.sigma
    }
}

impl Task for ConjugateGaussian {
    fn name(&self) -> &str {
        "conjugate_gaussian"
    }
    fn dim_theta(&self) -> usize {
        1
    }
    fn dim_x(&self) -> usize {
        1
    }
    fn prior_draw(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = std_normal(rng);
    }
    fn prior_log_density(&self, theta: &[f64]) -> f64 {
        normal_log_pdf(theta[0], 0.0, 1.0)
    }
    fn prior_std(&self) -> Vec<f64> {
        vec![1.0]
    }
    fn simulate_one(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = theta[0] + self.sigma * std_normal(rng);
    }
    fn log_likelihood(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        Some(normal_log_pdf(x[0], theta[0], self.sigma * self.sigma))
    }
    fn log_ratio(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        Some(normal_log_pdf(x[0], theta[0], self.sigma * self.sigma) - normal_log_pdf(x[0], 0.0, self.marginal_var()))
    }
    fn has_reference_posterior(&self) -> bool {
        true
    }
    fn reference_posterior(&self, x: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Matrix> {
        let (m, v) = self.posterior_mean_var(x[0]);
        let sd = v.sqrt();
        Ok(Matrix::column(&(0..n).map(|_| m + sd * std_normal(rng)).collect::<Vec<_>>()))
    }
}

const GL_DIM: usize = 10;
const GL_VAR: f64 = 0.1;

/// `theta ~ N(0, 0.1 I)`, `x | theta ~ N(theta, 0.1 I)` in 10 dimensions.
///
/// Marginal `x ~ N(0, 0.2 I)`; posterior `N(x / 2, 0.05 I)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianLinear;

impl Task for GaussianLinear {
    fn name(&self) -> &str {
        "gaussian_linear"
    }
    fn dim_theta(&self) -> usize {
        GL_DIM
    }
    fn dim_x(&self) -> usize {
        GL_DIM
    }
    fn prior_draw(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let sd = GL_VAR.sqrt();
        out.iter_mut().for_each(|v| *v = sd * std_normal(rng));
    }
    fn prior_log_density(&self, theta: &[f64]) -> f64 {
        theta.iter().map(|t| normal_log_pdf(*t, 0.0, GL_VAR)).sum()
    }
    fn prior_std(&self) -> Vec<f64> {
        vec![GL_VAR.sqrt(); GL_DIM]
    }
    fn simulate_one(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let sd = GL_VAR.sqrt();
        for (o, t) in out.iter_mut().zip(theta) {
            *o = t + sd * std_normal(rng);
        }
    }
    fn log_likelihood(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        Some(theta.iter().zip(x).map(|(t, x)| normal_log_pdf(*x, *t, GL_VAR)).sum())
    }
    fn log_ratio(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        Some(
            theta
                .iter()
                .zip(x)
                .map(|(t, x)| normal_log_pdf(*x, *t, GL_VAR) - normal_log_pdf(*x, 0.0, 2.0 * GL_VAR))
                .sum(),
        )
    }
    fn has_reference_posterior(&self) -> bool {
        true
    }
    fn reference_posterior(&self, x: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Matrix> {
        let sd = (GL_VAR / 2.0).sqrt();
        let mut m = Matrix::zeros(n, GL_DIM);
        for i in 0..n {
            for (j, v) in m.row_mut(i).iter_mut().enumerate() {
                *v = x[j] / 2.0 + sd * std_normal(rng);
            }
        }
        Ok(m)
    }
}

/// `theta ~ U(-1, 1)^10`, `x | theta ~ N(theta, 0.1 I)`.
///
/// The posterior factorizes into `N(x_j, 0.1)` truncated to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianLinearUniform;

impl Task for GaussianLinearUniform {
    fn name(&self) -> &str {
        "gaussian_linear_uniform"
    }
    fn dim_theta(&self) -> usize {
        GL_DIM
    }
    fn dim_x(&self) -> usize {
        GL_DIM
    }
    fn prior_draw(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        uniform_box_draw(-1.0, 1.0, rng, out);
    }
    fn prior_log_density(&self, theta: &[f64]) -> f64 {
        uniform_box_log_density(-1.0, 1.0, theta)
    }
    fn prior_std(&self) -> Vec<f64> {
        vec![2.0 / 12f64.sqrt(); GL_DIM]
    }
    fn simulate_one(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        GaussianLinear.simulate_one(theta, rng, out)
    }
    fn log_likelihood(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        GaussianLinear.log_likelihood(theta, x)
    }
    fn has_reference_posterior(&self) -> bool {
        true
    }
    fn reference_posterior(&self, x: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Matrix> {
        let sd = GL_VAR.sqrt();
        let mut m = Matrix::zeros(n, GL_DIM);
        for i in 0..n {
            for (j, v) in m.row_mut(i).iter_mut().enumerate() {
                *v = truncated_normal(x[j], sd, -1.0, 1.0, rng);
            }
        }
        Ok(m)
    }
}

const GM_BOUND: f64 = 10.0;
const GM_NARROW_SD: f64 = 0.1;

/// `theta ~ U(-10, 10)^2`,
/// `x | theta ~ 0.5 N(theta, I) + 0.5 N(theta, 0.01 I)`.
///
/// The likelihood is symmetric in `x - theta`, so the posterior is the same
/// mixture centred on `x`, truncated to the prior box, with component weights
/// proportional to each component's mass inside the box.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianMixture;

impl Task for GaussianMixture {
    fn name(&self) -> &str {
        "gaussian_mixture"
    }
    fn dim_theta(&self) -> usize {
        2
    }
    fn dim_x(&self) -> usize {
        2
    }
    fn prior_draw(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        uniform_box_draw(-GM_BOUND, GM_BOUND, rng, out);
    }
    fn prior_log_density(&self, theta: &[f64]) -> f64 {
        uniform_box_log_density(-GM_BOUND, GM_BOUND, theta)
    }
    fn prior_std(&self) -> Vec<f64> {
        vec![2.0 * GM_BOUND / 12f64.sqrt(); 2]
    }
    fn simulate_one(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        use rand::Rng;
        let sd = if rng.random::<bool>() { 1.0 } else { GM_NARROW_SD };
        for (o, t) in out.iter_mut().zip(theta) {
            *o = t + sd * std_normal(rng);
        }
    }
    fn log_likelihood(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        let comp = |sd: f64| -> f64 {
            theta.iter().zip(x).map(|(t, x)| normal_log_pdf(*x, *t, sd * sd)).sum()
        };
        Some(crate::math::logsumexp(&[comp(1.0), comp(GM_NARROW_SD)]) - std::f64::consts::LN_2)
    }
    fn has_reference_posterior(&self) -> bool {
        true
    }
    fn reference_posterior(&self, x: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Matrix> {
        use rand::Rng;
        let mass = |sd: f64| -> f64 { x.iter().map(|x| normal_mass(*x, sd, -GM_BOUND, GM_BOUND)).product() };
        let (w_wide, w_narrow) = (mass(1.0), mass(GM_NARROW_SD));
        if !(w_wide + w_narrow > 0.0) {
            return Err(Error::Sampling("observation has no posterior mass inside the prior box".into()));
        }
        let p_wide = w_wide / (w_wide + w_narrow);
        let mut m = Matrix::zeros(n, 2);
        for i in 0..n {
            let sd = if rng.random::<f64>() < p_wide { 1.0 } else { GM_NARROW_SD };
            for (j, v) in m.row_mut(i).iter_mut().enumerate() {
                *v = truncated_normal(x[j], sd, -GM_BOUND, GM_BOUND, rng);
            }
        }
        Ok(m)
    }
}
