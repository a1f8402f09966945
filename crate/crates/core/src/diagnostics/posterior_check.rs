use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::c2st;
use crate::posterior::{LogRatio, Sampler};
use crate::rng::{self, streams};
use crate::tasks::Task;
use crate::Result;

/// Seed of the fixed observation set shared by every run on a task.
pub const BENCHMARK_OBSERVATION_SEED: u64 = 0x0b5e_2fa7;

/// A simulated observation together with the parameter that generated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
}

/// `n` observations drawn from the joint with the observation stream of `seed`.
pub fn observations(task: &dyn Task, n: usize, seed: u64) -> Vec<Observation> {
    let mut r = rng::stream(seed, streams::OBSERVATIONS);
    (0..n)
        .map(|_| {
            let mut theta = vec![0.0; task.dim_theta()];
            let mut x = vec![0.0; task.dim_x()];
            task.prior_draw(&mut r, &mut theta);
            task.simulate_one(&theta, &mut r, &mut x);
            Observation { theta, x }
        })
        .collect()
}

/// The fixed observation set used for posterior benchmarks.
pub fn benchmark_observations(task: &dyn Task, n: usize) -> Vec<Observation> {
    observations(task, n, BENCHMARK_OBSERVATION_SEED)
}

/// C2ST accuracy between `n` reference posterior draws and `n` surrogate draws at `x`.
pub fn posterior_c2st(
    ratio: &dyn LogRatio,
    task: &dyn Task,
    x: &[f64],
    n: usize,
    sampler: Sampler,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let reference = task.reference_posterior(x, n, rng)?;
    let surrogate = sampler.sample(ratio, task, x, n, rng)?;
    c2st(&reference, &surrogate, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::AnalyticRatio;
    use crate::tasks::task_by_name;

    #[test]
    fn benchmark_observations_are_fixed() {
        let t = task_by_name("two_moons").unwrap();
        let a = benchmark_observations(t.as_ref(), 3);
        assert_eq!(a, benchmark_observations(t.as_ref(), 3));
        assert_ne!(a, observations(t.as_ref(), 3, 1));
        assert_eq!(a[0].x.len(), 2);
    }

    #[test]
    fn exact_ratio_is_indistinguishable_from_reference() {
        let t = task_by_name("conjugate_gaussian").unwrap();
        let r = AnalyticRatio::new(t.clone()).unwrap();
        let mut g = rng::stream(3, 0);
        let acc = posterior_c2st(&r, t.as_ref(), &[0.7], 1000, Sampler::Rejection, &mut g).unwrap();
        assert!(acc < 0.56, "{acc}");
    }
}
