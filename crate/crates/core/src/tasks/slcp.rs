use rand::{Rng, RngCore};

use super::{std_normal, uniform_box_draw, uniform_box_log_density, Task};
use crate::math::LN_2PI;
use crate::{Matrix, Result};

const BOUND: f64 = 3.0;
const DRAWS: usize = 4;

/// Simple likelihood, complex posterior. `theta ~ U(-3, 3)^5` and `x` stacks
/// four i.i.d. draws from a bivariate normal with
///
/// ```text
/// mean = (theta_1, theta_2)
/// s1 = theta_3^2, s2 = theta_4^2, rho = tanh(theta_5)
/// cov = [[s1^2, rho s1 s2], [rho s1 s2, s2^2]]
/// ```
///
/// so `dim x = 8`. The likelihood only sees `theta_3^2` and `theta_4^2`,
/// which gives four posterior modes related by sign flips.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Slcp;

impl Task for Slcp {
    fn name(&self) -> &str {
        "slcp"
    }
    fn dim_theta(&self) -> usize {
        5
    }
    fn dim_x(&self) -> usize {
        2 * DRAWS
    }
    fn prior_draw(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        uniform_box_draw(-BOUND, BOUND, rng, out);
    }
    fn prior_log_density(&self, theta: &[f64]) -> f64 {
        uniform_box_log_density(-BOUND, BOUND, theta)
    }
    fn prior_std(&self) -> Vec<f64> {
        vec![2.0 * BOUND / 12f64.sqrt(); 5]
    }
    fn simulate_one(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let (s1, s2, rho) = (theta[2] * theta[2], theta[3] * theta[3], theta[4].tanh());
        let c = (1.0 - rho * rho).sqrt();
        for k in 0..DRAWS {
            let z1 = std_normal(rng);
            let z2 = std_normal(rng);
            out[2 * k] = theta[0] + s1 * z1;
            out[2 * k + 1] = theta[1] + s2 * (rho * z1 + c * z2);
        }
    }
    fn log_likelihood(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        let (s1, s2, rho) = (theta[2] * theta[2], theta[3] * theta[3], theta[4].tanh());
        let one_m = 1.0 - rho * rho;
        if s1 == 0.0 || s2 == 0.0 || one_m <= 0.0 {
            return Some(f64::NEG_INFINITY);
        }
        let log_det = 2.0 * (s1.ln() + s2.ln()) + one_m.ln();
        let mut total = 0.0;
        for k in 0..DRAWS {
            let a = (x[2 * k] - theta[0]) / s1;
            let b = (x[2 * k + 1] - theta[1]) / s2;
            let q = (a * a - 2.0 * rho * a * b + b * b) / one_m;
            total += -LN_2PI - 0.5 * log_det - 0.5 * q;
        }
        Some(total)
    }
    fn has_reference_posterior(&self) -> bool {
        true
    }
    /// Slice sampling on the exact likelihood from several chains, followed by
    /// uniformly random sign flips of `theta_3` and `theta_4` to populate all modes.
    fn reference_posterior(&self, x: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Matrix> {
        let log_post = |t: &[f64]| {
            let lp = self.prior_log_density(t);
            if lp.is_finite() {
                lp + self.log_likelihood(t, x).unwrap_or(f64::NEG_INFINITY)
            } else {
                f64::NEG_INFINITY
            }
        };
        let chains = 4usize;
        let mut out = Matrix::zeros(0, 5);
        let widths = self.prior_std();
        for c in 0..chains {
            let per = n / chains + usize::from(c < n % chains);
            if per == 0 {
                continue;
            }
            // start from the best of a batch of prior draws
            let mut best = vec![0.0; 5];
            let mut best_lp = f64::NEG_INFINITY;
            let mut t = vec![0.0; 5];
            for _ in 0..2000 {
                self.prior_draw(rng, &mut t);
                let lp = log_post(&t);
                if lp > best_lp {
                    best_lp = lp;
                    best.copy_from_slice(&t);
                }
            }
            let draws = crate::posterior::slice_sample_density(&log_post, &best, &widths, per, 1000, rng)?;
            out = out.vstack(&draws)?;
        }
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for j in [2, 3] {
                if rng.random::<bool>() {
                    row[j] = -row[j];
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tasks::sample_prior;

    #[test]
    fn prior_support_and_dims() {
        let m = sample_prior(&Slcp, 10_000, &mut rng::stream(1, 0));
        assert!(m.data().iter().all(|v| (-3.0..=3.0).contains(v)));
        assert_eq!(Slcp.dim_x(), 8);
    }

    #[test]
    fn likelihood_matches_simulator_moments() {
        let theta = [0.5, -1.0, 1.2, 0.8, 0.7];
        let mut r = rng::stream(2, 0);
        let n = 50_000;
        let mut xs = vec![0.0; 8];
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            Slcp.simulate_one(&theta, &mut r, &mut xs);
            let (a, b) = (xs[0] - 0.5, xs[1] + 1.0);
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
        }
        let (s1, s2, rho) = (1.44, 0.64, 0.7f64.tanh());
        assert!((sxx / n as f64 - s1 * s1).abs() < 0.05);
        assert!((syy / n as f64 - s2 * s2).abs() < 0.02);
        assert!((sxy / n as f64 - rho * s1 * s2).abs() < 0.02);
    }

    #[test]
    fn likelihood_is_sign_symmetric() {
        let x = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.0];
        let a = Slcp.log_likelihood(&[0.1, 0.2, 0.9, -1.1, 0.3], &x).unwrap();
        let b = Slcp.log_likelihood(&[0.1, 0.2, -0.9, 1.1, 0.3], &x).unwrap();
        assert_eq!(a, b);
    }
}
