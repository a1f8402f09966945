//! Helpers shared by the integration tests and the acceptance target.
#![allow(dead_code)]

use std::sync::Arc;

use cnre_core::loss::{self, assemble_contrastive_batch, ContrastiveBatch, LossConfig, Regime};
use cnre_core::nn::{Architecture, Mode, RatioNet};
use cnre_core::posterior::{AnalyticRatio, LogRatio};
use cnre_core::rng;
use cnre_core::tasks::{ConjugateGaussian, JointBatch, Task};
use cnre_core::Matrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// A small network with the default random initialization.
pub fn random_net<R: Rng>(input_dim: usize, rng: &mut R) -> RatioNet {
    let arch = Architecture::new(input_dim, rng.random_range(3..12), rng.random_range(1..3));
    RatioNet::new(arch, rng).unwrap()
}

/// Independent and dependent batches built from Gaussian noise by circular shifts.
pub fn random_batches<R: Rng>(b: usize, k: usize, dt: usize, dx: usize, rng: &mut R) -> (ContrastiveBatch, ContrastiveBatch) {
    let joint = JointBatch {
        theta: normal_matrix(b, dt, rng),
        x: normal_matrix(b, dx, rng),
    };
    assemble_contrastive_batch(&joint, Regime::Bootstrap, k, None, rng).unwrap()
}

/// Worst absolute differences `(|C(1,1) - A|, |C(1e6,10) - B(10)|)` over `n` random batches and nets.
pub fn loss_identity_gaps(n: usize, seed: u64) -> (f64, f64) {
    let mut r = rng::stream(seed, 100);
    let (mut gap_a, mut gap_b) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let dt = r.random_range(1..4);
        let dx = r.random_range(1..4);
        let mut net = random_net(dt + dx, &mut r);
        net.set_mode(Mode::Eval);
        let (ind, dep) = random_batches(r.random_range(2..40), 1, dt, dx, &mut r);
        let c = loss::loss_nrec(&mut net, &ind, &dep, 1.0).unwrap();
        let a = loss::loss_nrea(&mut net, &ind, &dep).unwrap();
        gap_a = gap_a.max((c - a).abs());
        let (ind, dep) = random_batches(r.random_range(20..60), 10, dt, dx, &mut r);
        let c = loss::loss_nrec(&mut net, &ind, &dep, 1e6).unwrap();
        let bl = loss::loss_nreb(&mut net, &dep).unwrap();
        gap_b = gap_b.max((c - bl).abs());
    }
    (gap_a, gap_b)
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    /// `|g - fd|_2 / max(|g|_2, |fd|_2)` over the checked coordinates.
    pub rel_error: f64,
    /// Worst coordinate error `|g_i - fd_i| / max(|g_i|, |fd_i|, floor)`.
    pub worst_coord: f64,
    pub checked: usize,
    /// Coordinates dropped because every step crossed a ReLU kink.
    pub skipped: usize,
}

pub const COORD_FLOOR: f64 = 1e-6;

/// Central differences of the NRE-C loss against the analytic gradient.
/// A step that changes the ReLU pattern is retried with smaller steps.
pub fn gradient_check(step: f64, seed: u64) -> GradCheck {
    let mut r = rng::stream(seed, 101);
    let dt = r.random_range(1..4);
    let dx = r.random_range(1..4);
    let k = r.random_range(1..5);
    let b = r.random_range(2 * k..2 * k + 12);
    let gamma = 10f64.powf(r.random_range(-1.0..1.5));
    let cfg = LossConfig::nrec(gamma, k).unwrap();
    let mut net = random_net(dt + dx, &mut r);
    let (ind, dep) = random_batches(b, k, dt, dx, &mut r);
    loss::loss(&mut net, &cfg, &ind, &dep).unwrap();
    let pattern = net.activation_pattern().unwrap();
    let (_, g) = loss::loss_and_grad(&mut net, &cfg, &ind, &dep).unwrap();
    let eval = |net: &mut RatioNet| {
        let l = loss::loss(net, &cfg, &ind, &dep).unwrap();
        (l, net.activation_pattern().unwrap())
    };
    let (mut num, mut den_g, mut den_fd) = (0.0, 0.0, 0.0);
    let mut worst = 0.0f64;
    let (mut checked, mut skipped) = (0, 0);
    for i in 0..net.num_params() {
        let orig = net.params()[i];
        let mut fd = None;
        for s in [step, step * 1e-1, step * 1e-2] {
            net.params_mut()[i] = orig + s;
            let (lp, pp) = eval(&mut net);
            net.params_mut()[i] = orig - s;
            let (lm, pm) = eval(&mut net);
            net.params_mut()[i] = orig;
            if pp == pattern && pm == pattern {
                fd = Some((lp - lm) / (2.0 * s));
                break;
            }
        }
        let Some(fd) = fd else {
            skipped += 1;
            continue;
        };
        checked += 1;
        num += (g[i] - fd).powi(2);
        den_g += g[i] * g[i];
        den_fd += fd * fd;
        worst = worst.max((g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(COORD_FLOOR));
    }
    GradCheck {
        rel_error: num.sqrt() / den_g.sqrt().max(den_fd.sqrt()).max(f64::MIN_POSITIVE),
        worst_coord: worst,
        checked,
        skipped,
    }
}

pub fn conjugate(sigma: f64) -> Arc<dyn Task> {
    Arc::new(ConjugateGaussian::new(sigma).unwrap())
}

pub fn analytic(task: &Arc<dyn Task>) -> AnalyticRatio {
    AnalyticRatio::new(task.clone()).unwrap()
}

/// Points `(theta, x)` on an `n x n` grid spanning +-2.5 prior std and
/// +-2.5 marginal std of the conjugate Gaussian task.
pub fn conjugate_grid(sigma: f64, n: usize) -> Vec<(f64, f64)> {
    let xs = 2.5 * (1.0 + sigma * sigma).sqrt();
    let lin = |half: f64| (0..n).map(move |i| -half + 2.0 * half * i as f64 / (n - 1) as f64);
    lin(2.5).flat_map(|t| lin(xs).map(move |x| (t, x))).collect()
}

/// Fraction of grid points where `|h - log r| < tol`, and the worst error.
pub fn grid_agreement(ratio: &dyn LogRatio, task: &Arc<dyn Task>, sigma: f64, tol: f64) -> (f64, f64) {
    let pts = conjugate_grid(sigma, 21);
    let theta = Matrix::column(&pts.iter().map(|p| p.0).collect::<Vec<_>>());
    let x = Matrix::column(&pts.iter().map(|p| p.1).collect::<Vec<_>>());
    let h = ratio.log_ratio_pairs(&theta, &x).unwrap();
    let exact = analytic(task).log_ratio_pairs(&theta, &x).unwrap();
    let errs: Vec<f64> = h.iter().zip(&exact).map(|(a, b)| (a - b).abs()).collect();
    let inside = errs.iter().filter(|e| **e < tol).count();
    (inside as f64 / errs.len() as f64, errs.iter().copied().fold(0.0, f64::max))
}
