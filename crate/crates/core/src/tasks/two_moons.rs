use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, SQRT_2};

use rand::{Rng, RngCore};

use super::{std_normal, uniform_box_draw, uniform_box_log_density, Task};
use crate::math::normal_log_pdf;
use crate::{Error, Matrix, Result};

const R_MEAN: f64 = 0.1;
const R_SD: f64 = 0.01;
const OFFSET: f64 = 0.25;
const MAX_PROPOSALS: usize = 100_000_000;

/// `theta ~ U(-1, 1)^2`. With `a ~ U(-pi/2, pi/2)`, `r ~ N(0.1, 0.01^2)` and
/// `p = (r cos a + 0.25, r sin a)`:
///
/// ```text
/// x = p + (-|theta_1 + theta_2| / sqrt 2, (-theta_1 + theta_2) / sqrt 2)
/// ```
///
/// The absolute value folds the parameter plane, so every `x` has a crescent
/// posterior with two modes mirrored across `theta_1 + theta_2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TwoMoons;

impl TwoMoons {
    fn shift(theta: &[f64]) -> (f64, f64) {
        (
            -(theta[0] + theta[1]).abs() * FRAC_1_SQRT_2,
            (theta[1] - theta[0]) * FRAC_1_SQRT_2,
        )
    }
}

impl Task for TwoMoons {
    fn name(&self) -> &str {
        "two_moons"
    }
    fn dim_theta(&self) -> usize {
        2
    }
    fn dim_x(&self) -> usize {
        2
    }
    fn prior_draw(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        uniform_box_draw(-1.0, 1.0, rng, out);
    }
    fn prior_log_density(&self, theta: &[f64]) -> f64 {
        uniform_box_log_density(-1.0, 1.0, theta)
    }
    fn prior_std(&self) -> Vec<f64> {
        vec![2.0 / 12f64.sqrt(); 2]
    }
    fn simulate_one(&self, theta: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let a = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        let r = R_MEAN + R_SD * std_normal(rng);
        let (s0, s1) = Self::shift(theta);
        out[0] = r * a.cos() + OFFSET + s0;
        out[1] = r * a.sin() + s1;
    }
    /// Density of `p` in polar form: `N(r; 0.1, 0.01^2) / (pi r)` on the right half-plane.
    fn log_likelihood(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        let (s0, s1) = Self::shift(theta);
        let d0 = x[0] - s0 - OFFSET;
        let d1 = x[1] - s1;
        let r = d0.hypot(d1);
        if d0 <= 0.0 || r == 0.0 {
            return Some(f64::NEG_INFINITY);
        }
        Some(normal_log_pdf(r, R_MEAN, R_SD * R_SD) - PI.ln() - r.ln())
    }
    fn has_reference_posterior(&self) -> bool {
        true
    }
    /// Exact sampler: draw `p`, pick a side of the fold uniformly, invert the
    /// shift, and keep the result if it lies in the prior box.
    fn reference_posterior(&self, x: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Matrix> {
        let mut out = Matrix::zeros(n, 2);
        let mut filled = 0;
        let mut proposals = 0;
        while filled < n {
            proposals += 1;
            if proposals > MAX_PROPOSALS {
                return Err(Error::Sampling(format!(
                    "two_moons reference: {filled} of {n} draws after {MAX_PROPOSALS} proposals"
                )));
            }
            let a = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            let r = R_MEAN + R_SD * std_normal(rng);
            let u0 = x[0] - (r * a.cos() + OFFSET);
            let u1 = x[1] - r * a.sin();
            if u0 > 0.0 {
                continue;
            }
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let sum = -sign * SQRT_2 * u0;
            let diff = SQRT_2 * u1;
            let t0 = (sum - diff) / 2.0;
            let t1 = (sum + diff) / 2.0;
            if t0.abs() <= 1.0 && t1.abs() <= 1.0 {
                out.row_mut(filled).copy_from_slice(&[t0, t1]);
                filled += 1;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tasks::{sample_prior, simulate};

    #[test]
    fn prior_support() {
        let m = sample_prior(&TwoMoons, 10_000, &mut rng::stream(1, 0));
        assert!(m.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn reference_draws_reproduce_the_observation_scale() {
        // posterior draws simulate back to data near the observation
        let mut r = rng::stream(2, 0);
        let theta_true = [0.3, -0.5];
        let x = simulate(&TwoMoons, &Matrix::from_rows(&[theta_true]).unwrap(), &mut r).unwrap();
        let post = TwoMoons.reference_posterior(x.row(0), 2000, &mut r).unwrap();
        for i in 0..post.rows() {
            assert!(TwoMoons.log_likelihood(post.row(i), x.row(0)).unwrap().is_finite());
        }
    }

    #[test]
    fn posterior_is_bimodal_across_the_fold() {
        let mut r = rng::stream(3, 0);
        let x = [0.0, 0.1];
        let post = TwoMoons.reference_posterior(&x, 4000, &mut r).unwrap();
        let pos = (0..post.rows()).filter(|&i| post.get(i, 0) + post.get(i, 1) > 0.0).count();
        let frac = pos as f64 / post.rows() as f64;
        assert!(frac > 0.4 && frac < 0.6, "{frac}");
        // each mode is a thin crescent: the radial coordinate of p stays near 0.1
        for i in 0..post.rows() {
            let (s0, s1) = TwoMoons::shift(post.row(i));
            let r = (x[0] - s0 - OFFSET).hypot(x[1] - s1);
            assert!((r - R_MEAN).abs() < 6.0 * R_SD);
        }
    }

    #[test]
    fn likelihood_integrates_to_one() {
        // grid integral of p(x|theta) over x
        let theta = [0.2, 0.1];
        let h = 0.002;
        let mut total = 0.0;
        let mut x0 = -0.6;
        while x0 < 0.6 {
            let mut x1 = -0.6;
            while x1 < 0.6 {
                total += TwoMoons.log_likelihood(&theta, &[x0, x1]).unwrap().exp() * h * h;
                x1 += h;
            }
            x0 += h;
        }
        assert!((total - 1.0).abs() < 0.02, "{total}");
    }
}
