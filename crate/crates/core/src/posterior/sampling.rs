use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use rand_distr::{Distribution, Exp1};

use super::LogRatio;
use crate::tasks::{sample_prior, Task};
use crate::{Error, Matrix, Result};

const PROBES: usize = 10_000;
const ENVELOPE_FACTOR: f64 = 1.2;
const MIN_ACCEPTANCE: f64 = 1e-4;
const MIN_PROPOSALS_BEFORE_ABORT: usize = 100_000;
const PROPOSAL_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionOutcome {
    pub samples: Matrix,
    pub proposals: usize,
    pub acceptance_rate: f64,
    /// Number of times the envelope had to be raised.
    pub restarts: usize,
}

/// Rejection sampling from `exp(h) p(theta)` with the prior as proposal.
///
/// The envelope is `1.2 * max exp(h)` over 10^4 prior probes. If a proposal
/// exceeds it, the envelope is raised and sampling restarts from scratch so
/// the accepted set stays exact.
pub fn rejection_sample(
    ratio: &dyn LogRatio,
    task: &dyn Task,
    x: &[f64],
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<RejectionOutcome> {
    let d = task.dim_theta();
    if n == 0 {
        return Ok(RejectionOutcome {
            samples: Matrix::zeros(0, d),
            proposals: 0,
            acceptance_rate: 0.0,
            restarts: 0,
        });
    }
    let probes = sample_prior(task, PROBES, rng);
    let h = ratio.log_ratio_batch(&probes, x)?;
    let mut log_env = h.iter().copied().fold(f64::NEG_INFINITY, f64::max) + ENVELOPE_FACTOR.ln();
    if !log_env.is_finite() {
        return Err(Error::Sampling("log ratio is not finite on the prior probes".into()));
    }
    let mut restarts = 0;
    let mut accepted: Vec<f64> = Vec::with_capacity(n * d);
    let mut proposals = 0usize;
    'outer: loop {
        let theta = sample_prior(task, PROPOSAL_CHUNK, rng);
        let h = ratio.log_ratio_batch(&theta, x)?;
        let hmax = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hmax > log_env {
            log::warn!("log ratio {hmax:.3} exceeds the rejection envelope {log_env:.3}; raising it and restarting");
            log_env = hmax + ENVELOPE_FACTOR.ln();
            accepted.clear();
            proposals = 0;
            restarts += 1;
            continue;
        }
        for (i, hi) in h.iter().enumerate() {
            proposals += 1;
            if rng.random::<f64>().ln() < hi - log_env {
                accepted.extend_from_slice(theta.row(i));
                if accepted.len() == n * d {
                    break 'outer;
                }
            }
        }
        let rate = accepted.len() as f64 / d as f64 / proposals as f64;
        if proposals >= MIN_PROPOSALS_BEFORE_ABORT && rate < MIN_ACCEPTANCE {
            return Err(Error::Sampling(format!(
                "acceptance rate {rate:.2e} after {proposals} proposals; envelope too loose or ratio degenerate"
            )));
        }
    }
    Ok(RejectionOutcome {
        samples: Matrix::from_vec(n, d, accepted)?,
        proposals,
        acceptance_rate: n as f64 / proposals as f64,
        restarts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSettings {
    pub warmup: usize,
    /// Maximum number of width steps taken on each side while stepping out.
    pub max_steps: usize,
    pub init_retries: usize,
}

impl Default for SliceSettings {
    fn default() -> Self {
        Self {
            warmup: 200,
            max_steps: 32,
            init_retries: 100,
        }
    }
}

/// Coordinate-wise slice sampling on `h(theta, x) + log p(theta)`, split over
/// `chains` chains each started from a prior draw. Returns `n` post-warmup draws.
pub fn slice_sample(
    ratio: &dyn LogRatio,
    task: &dyn Task,
    x: &[f64],
    n: usize,
    chains: usize,
    rng: &mut dyn RngCore,
) -> Result<Matrix> {
    let settings = SliceSettings::default();
    let d = task.dim_theta();
    let chains = chains.max(1);
    let log_density = |t: &[f64]| -> f64 {
        let lp = task.prior_log_density(t);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        match ratio.log_ratio(t, x) {
            Ok(h) if h.is_finite() => h + lp,
            _ => f64::NEG_INFINITY,
        }
    };
    let widths = task.prior_std();
    let mut out = Matrix::zeros(0, d);
    let mut init = vec![0.0; d];
    for c in 0..chains {
        let per = n / chains + usize::from(c < n % chains);
        if per == 0 {
            continue;
        }
        let mut ok = false;
        for _ in 0..settings.init_retries {
            task.prior_draw(rng, &mut init);
            if log_density(&init).is_finite() {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::Sampling(format!(
                "no finite density at {} prior draws",
                settings.init_retries
            )));
        }
        let draws = slice_with(&log_density, &init, &widths, per, &settings, rng)?;
        out = out.vstack(&draws)?;
    }
    Ok(out)
}

/// Slice sampling on an arbitrary log density from a given start.
pub fn slice_sample_density(
    log_density: &dyn Fn(&[f64]) -> f64,
    init: &[f64],
    widths: &[f64],
    n: usize,
    warmup: usize,
    rng: &mut dyn RngCore,
) -> Result<Matrix> {
    let settings = SliceSettings {
        warmup,
        ..SliceSettings::default()
    };
    slice_with(log_density, init, widths, n, &settings, rng)
}

fn slice_with(
    log_density: &dyn Fn(&[f64]) -> f64,
    init: &[f64],
    widths: &[f64],
    n: usize,
    s: &SliceSettings,
    rng: &mut dyn RngCore,
) -> Result<Matrix> {
    let d = init.len();
    if widths.len() != d {
        return Err(Error::Shape("one slice width per coordinate required".into()));
    }
    let mut cur = init.to_vec();
    let mut cur_lp = log_density(&cur);
    if !cur_lp.is_finite() {
        return Err(Error::Sampling("slice sampler started at a point of zero density".into()));
    }
    let mut out = Matrix::zeros(n, d);
    for it in 0..s.warmup + n {
        for j in 0..d {
            cur_lp = slice_coordinate(log_density, &mut cur, cur_lp, j, widths[j], s.max_steps, rng);
        }
        if it >= s.warmup {
            out.row_mut(it - s.warmup).copy_from_slice(&cur);
        }
    }
    Ok(out)
}

/// One stepping-out and shrinkage update of coordinate `j`; returns the new log density.
fn slice_coordinate(
    f: &dyn Fn(&[f64]) -> f64,
    cur: &mut [f64],
    cur_lp: f64,
    j: usize,
    w: f64,
    max_steps: usize,
    rng: &mut dyn RngCore,
) -> f64 {
    let e: f64 = Exp1.sample(rng);
    let level = cur_lp - e;
    let x0 = cur[j];
    let eval = |v: f64, cur: &mut [f64]| {
        cur[j] = v;
        f(cur)
    };
    let mut lo = x0 - w * rng.random::<f64>();
    let mut hi = lo + w;
    let mut left_steps = (max_steps as f64 * rng.random::<f64>()) as usize;
    let mut right_steps = max_steps.saturating_sub(1).saturating_sub(left_steps);
    while left_steps > 0 && eval(lo, cur) > level {
        lo -= w;
        left_steps -= 1;
    }
    while right_steps > 0 && eval(hi, cur) > level {
        hi += w;
        right_steps -= 1;
    }
    for _ in 0..1000 {
        let v = lo + (hi - lo) * rng.random::<f64>();
        let lp = eval(v, cur);
        if lp > level {
            return lp;
        }
        if v < x0 {
            lo = v;
        } else {
            hi = v;
        }
    }
    cur[j] = x0;
    cur_lp
}

/// Which sampler draws from a surrogate posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Rejection,
    Slice,
    /// Rejection sampling, falling back to slice sampling if it aborts.
    Auto,
}

/// Chains used when slice sampling a surrogate.
pub const SLICE_CHAINS: usize = 4;

impl Sampler {
    pub fn sample(self, ratio: &dyn LogRatio, task: &dyn Task, x: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Matrix> {
        match self {
            Sampler::Rejection => Ok(rejection_sample(ratio, task, x, n, rng)?.samples),
            Sampler::Slice => slice_sample(ratio, task, x, n, SLICE_CHAINS, rng),
            Sampler::Auto => match rejection_sample(ratio, task, x, n, rng) {
                Ok(o) => Ok(o.samples),
                Err(Error::Sampling(msg)) => {
                    log::warn!("rejection sampling failed ({msg}); using slice sampling");
                    slice_sample(ratio, task, x, n, SLICE_CHAINS, rng)
                }
                Err(e) => Err(e),
            },
        }
    }
}

impl std::str::FromStr for Sampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rejection" => Ok(Sampler::Rejection),
            "slice" => Ok(Sampler::Slice),
            "auto" => Ok(Sampler::Auto),
            other => Err(Error::Config(format!("unknown sampler {other:?}"))),
        }
    }
}

impl std::fmt::Display for Sampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sampler::Rejection => "rejection",
            Sampler::Slice => "slice",
            Sampler::Auto => "auto",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{mean, sample_variance};
    use crate::posterior::{AnalyticRatio, FnRatio};
    use crate::rng;
    use crate::tasks::{task_by_name, ConjugateGaussian};

    #[test]
    fn rejection_n_zero_is_empty() {
        let t = ConjugateGaussian::default();
        let z = FnRatio::new(1, 1, |_: &[f64], _: &[f64]| 0.0);
        let o = rejection_sample(&z, &t, &[0.0], 0, &mut rng::stream(1, 0)).unwrap();
        assert_eq!(o.samples.shape(), (0, 1));
    }

    #[test]
    fn rejection_matches_conjugate_posterior() {
        let task = task_by_name("conjugate_gaussian").unwrap();
        let r = AnalyticRatio::new(task.clone()).unwrap();
        let o = rejection_sample(&r, task.as_ref(), &[2.0], 10_000, &mut rng::stream(2, 0)).unwrap();
        let s = o.samples.into_vec();
        assert!((mean(&s) - 1.0).abs() < 4.0 * (0.5f64 / 1e4).sqrt());
        assert!((sample_variance(&s) - 0.5).abs() < 0.03);
        assert!(o.acceptance_rate > 0.0 && o.acceptance_rate <= 1.0);
    }

    #[test]
    fn slice_matches_conjugate_posterior() {
        let task = task_by_name("conjugate_gaussian").unwrap();
        let r = AnalyticRatio::new(task.clone()).unwrap();
        let s = slice_sample(&r, task.as_ref(), &[2.0], 10_000, 4, &mut rng::stream(3, 0)).unwrap();
        let s = s.into_vec();
        assert_eq!(s.len(), 10_000);
        assert!((mean(&s) - 1.0).abs() < 0.05);
        assert!((sample_variance(&s) - 0.5).abs() < 0.05);
    }

    #[test]
    fn degenerate_ratio_aborts() {
        // a single probe sees a huge ratio that no proposal ever reaches again
        use std::sync::atomic::{AtomicUsize, Ordering};
        let t = ConjugateGaussian::default();
        let calls = AtomicUsize::new(0);
        let spike = FnRatio::new(1, 1, move |_: &[f64], _: &[f64]| {
            if calls.fetch_add(1, Ordering::Relaxed) == 0 {
                20.0
            } else {
                0.0
            }
        });
        let res = rejection_sample(&spike, &t, &[0.0], 1000, &mut rng::stream(4, 0));
        assert!(matches!(res, Err(Error::Sampling(_))));
    }

    #[test]
    fn slice_respects_bounded_support() {
        let t = task_by_name("two_moons").unwrap();
        let z = FnRatio::new(2, 2, |_: &[f64], _: &[f64]| 0.0);
        let s = slice_sample(&z, t.as_ref(), &[0.0, 0.0], 2000, 2, &mut rng::stream(5, 0)).unwrap();
        assert!(s.data().iter().all(|v| v.abs() <= 1.0));
        let m = s.column_means();
        assert!(m.iter().all(|v| v.abs() < 0.1));
    }
}
