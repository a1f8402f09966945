//! NRE-A/B/C classification losses and contrastive batch assembly.
//!
//! For `K` candidate parameters `Theta = (theta_1..theta_K)` and an
//! observation `x`, NRE-C distinguishes class `y = 0` (all candidates drawn
//! independently of `x`) from classes `y = k` (candidate `k` generated `x`).
//! With `gamma` the odds of a dependent set:
//!
//! ```text
//! q(y=0 | Theta, x) = K / (K + gamma * sum_i exp h(theta_i, x))
//! q(y=k | Theta, x) = gamma exp h(theta_k, x) / (K + gamma * sum_i exp h(theta_i, x))
//! ```
//!
//! NRE-A is the case `gamma = 1, K = 1`; NRE-B is the limit `gamma -> inf`
//! restricted to the dependent term.

mod assemble;

use serde::{Deserialize, Serialize};

pub use assemble::{assemble_contrastive_batch, ContrastiveBatch, Regime};

use crate::math::{log_sigmoid, logsumexp, sigmoid};
use crate::nn::RatioNet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
    C,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().trim_start_matches("NRE-") {
            "A" => Ok(Variant::A),
            "B" => Ok(Variant::B),
            "C" => Ok(Variant::C),
            _ => Err(Error::Config(format!("unknown loss variant {s:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::A => "A",
            Variant::B => "B",
            Variant::C => "C",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub variant: Variant,
    pub gamma: f64,
    pub k: usize,
}

impl LossConfig {
    pub fn nrea() -> Self {
        Self {
            variant: Variant::A,
            gamma: 1.0,
            k: 1,
        }
    }

    /// NRE-B is the `gamma -> inf` limit; the stored `gamma` is ignored.
    pub fn nreb(k: usize) -> Result<Self> {
        Self::new(Variant::B, 1.0, k)
    }

    pub fn nrec(gamma: f64, k: usize) -> Result<Self> {
        Self::new(Variant::C, gamma, k)
    }

    pub fn new(variant: Variant, gamma: f64, k: usize) -> Result<Self> {
        let cfg = match variant {
            Variant::A => Self::nrea(),
            Variant::B => Self { variant, gamma: 1.0, k },
            Variant::C => Self { variant, gamma, k },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        match self.variant {
            Variant::A if self.gamma != 1.0 || self.k != 1 => {
                Err(Error::Config("NRE-A requires gamma = 1 and K = 1".into()))
            }
            Variant::C if !(self.gamma > 0.0 && self.gamma.is_finite()) => {
                Err(Error::Config(format!("gamma must be positive and finite, got {}", self.gamma)))
            }
            _ => Ok(()),
        }
    }

    /// Prior probability of the independent class, `1 / (1 + gamma)`.
    pub fn p0(&self) -> f64 {
        match self.variant {
            Variant::B => 0.0,
            _ => 1.0 / (1.0 + self.gamma),
        }
    }

    /// Prior probability of each dependent class, `gamma / (K (1 + gamma))`.
    pub fn pk(&self) -> f64 {
        match self.variant {
            Variant::B => 1.0 / self.k as f64,
            _ => self.gamma / (self.k as f64 * (1.0 + self.gamma)),
        }
    }

    /// `gamma` for display; `inf` for NRE-B.
    pub fn gamma_label(&self) -> String {
        match self.variant {
            Variant::B => "inf".into(),
            _ => self.gamma.to_string(),
        }
    }

    /// Whether the loss uses the independent term at all.
    pub fn uses_independent_term(&self) -> bool {
        self.variant != Variant::B
    }
}

fn check_finite(h: &[f64]) -> Result<()> {
    if let Some(i) = h.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite logit {} at index {i}", h[i])));
    }
    Ok(())
}

/// `K + 1` class log-probabilities `[log q(y=0), log q(y=1), ..., log q(y=K)]`.
pub fn nrec_class_log_probs(h: &[f64], gamma: f64, k: usize) -> Result<Vec<f64>> {
    if h.len() != k || k == 0 {
        return Err(Error::Shape(format!("expected {k} logits, got {}", h.len())));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be positive and finite, got {gamma}")));
    }
    check_finite(h)?;
    let lg = gamma.ln();
    let lk = (k as f64).ln();
    let mut terms = Vec::with_capacity(k + 1);
    terms.push(lk);
    terms.extend(h.iter().map(|v| lg + v));
    let l = logsumexp(&terms);
    Ok(terms.into_iter().map(|t| t - l).collect())
}

/// Loss value and its gradient with respect to the logits of each term.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitLoss {
    pub loss: f64,
    pub grad_indep: Vec<f64>,
    pub grad_dep: Vec<f64>,
}

fn check_layout(h: &[f64], k: usize, what: &str) -> Result<usize> {
    if k == 0 || h.len() % k != 0 {
        return Err(Error::Shape(format!("{what} has {} logits, not a multiple of K = {k}", h.len())));
    }
    Ok(h.len() / k)
}

/// Empirical NRE-C loss from logits laid out row-major as `B x K`.
/// `target[b]` is the slot of the generating parameter in dependent row `b`.
pub fn nrec_loss_from_logits(
    indep: &[f64],
    dep: &[f64],
    target: &[usize],
    gamma: f64,
    k: usize,
) -> Result<LogitLoss> {
    let b = check_layout(indep, k, "independent term")?;
    if check_layout(dep, k, "dependent term")? != b || target.len() != b {
        return Err(Error::Shape("independent and dependent terms must share B and K".into()));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be positive and finite, got {gamma}")));
    }
    check_finite(indep)?;
    check_finite(dep)?;
    let w0 = 1.0 / (1.0 + gamma);
    let wk = gamma / (1.0 + gamma);
    let bf = b as f64;
    let mut loss = 0.0;
    let mut grad_indep = vec![0.0; indep.len()];
    let mut grad_dep = vec![0.0; dep.len()];
    let mut lp = Vec::with_capacity(k + 1);
    for row in 0..b {
        let r = row * k..(row + 1) * k;
        lp.clear();
        lp.extend(nrec_class_log_probs(&indep[r.clone()], gamma, k)?);
        loss -= w0 * lp[0];
        for (g, l) in grad_indep[r.clone()].iter_mut().zip(&lp[1..]) {
            *g = w0 * l.exp() / bf;
        }
        let t = target[row];
        if t >= k {
            return Err(Error::Shape(format!("target slot {t} out of range for K = {k}")));
        }
        lp.clear();
        lp.extend(nrec_class_log_probs(&dep[r.clone()], gamma, k)?);
        loss -= wk * lp[1 + t];
        for (i, (g, l)) in grad_dep[r].iter_mut().zip(&lp[1..]).enumerate() {
            *g = wk * (l.exp() - if i == t { 1.0 } else { 0.0 }) / bf;
        }
    }
    Ok(LogitLoss {
        loss: loss / bf,
        grad_indep,
        grad_dep,
    })
}

/// Binary cross-entropy of NRE-A: `-(1/2B)[sum log(1 - s(f_indep)) + sum log s(f_dep)]`.
pub fn nrea_loss_from_logits(indep: &[f64], dep: &[f64]) -> Result<LogitLoss> {
    if indep.len() != dep.len() {
        return Err(Error::Shape(format!(
            "{} independent vs {} dependent pairs",
            indep.len(),
            dep.len()
        )));
    }
    check_finite(indep)?;
    check_finite(dep)?;
    let two_b = 2.0 * indep.len().max(1) as f64;
    let loss = -(indep.iter().map(|f| log_sigmoid(-f)).sum::<f64>() + dep.iter().map(|f| log_sigmoid(*f)).sum::<f64>())
        / two_b;
    Ok(LogitLoss {
        loss,
        grad_indep: indep.iter().map(|f| sigmoid(*f) / two_b).collect(),
        grad_dep: dep.iter().map(|f| (sigmoid(*f) - 1.0) / two_b).collect(),
    })
}

/// NRE-B softmax cross-entropy over the `K` slots of each dependent row.
pub fn nreb_loss_from_logits(dep: &[f64], target: &[usize], k: usize) -> Result<LogitLoss> {
    let b = check_layout(dep, k, "dependent term")?;
    if target.len() != b {
        return Err(Error::Shape(format!("{} targets for {b} rows", target.len())));
    }
    check_finite(dep)?;
    let bf = b.max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; dep.len()];
    for row in 0..b {
        let r = row * k..(row + 1) * k;
        let h = &dep[r.clone()];
        let l = logsumexp(h);
        let t = target[row];
        if t >= k {
            return Err(Error::Shape(format!("target slot {t} out of range for K = {k}")));
        }
        loss -= h[t] - l;
        for (i, (g, v)) in grad[r].iter_mut().zip(h).enumerate() {
            *g = ((v - l).exp() - if i == t { 1.0 } else { 0.0 }) / bf;
        }
    }
    Ok(LogitLoss {
        loss: loss / bf,
        grad_indep: Vec::new(),
        grad_dep: grad,
    })
}

/// Dispatches on the variant. For NRE-B, `indep` is ignored.
pub fn loss_from_logits(cfg: &LossConfig, indep: &[f64], dep: &[f64], target: &[usize]) -> Result<LogitLoss> {
    cfg.validate()?;
    match cfg.variant {
        Variant::A => nrea_loss_from_logits(indep, dep),
        Variant::B => nreb_loss_from_logits(dep, target, cfg.k),
        Variant::C => nrec_loss_from_logits(indep, dep, target, cfg.gamma, cfg.k),
    }
}

fn check_batches(cfg: &LossConfig, indep: &ContrastiveBatch, dep: &ContrastiveBatch) -> Result<()> {
    if dep.k() != cfg.k || (cfg.uses_independent_term() && indep.k() != cfg.k) {
        return Err(Error::Shape(format!(
            "batches carry K = ({}, {}) but the loss expects {}",
            indep.k(),
            dep.k(),
            cfg.k
        )));
    }
    if cfg.uses_independent_term() && indep.batch_size() != dep.batch_size() {
        return Err(Error::Shape("independent and dependent batches differ in size".into()));
    }
    Ok(())
}

/// Network logits for both terms from one forward pass over `[indep; dep]`
/// (NRE-B evaluates only the dependent term). Uses the network's current mode.
fn batch_logits(
    net: &mut RatioNet,
    cfg: &LossConfig,
    indep: &ContrastiveBatch,
    dep: &ContrastiveBatch,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_batches(cfg, indep, dep)?;
    if cfg.uses_independent_term() {
        let input = indep.pair_input()?.vstack(&dep.pair_input()?)?;
        let mut h = net.forward(&input)?;
        let dep_h = h.split_off(indep.num_pairs());
        Ok((h, dep_h))
    } else {
        Ok((Vec::new(), net.forward(&dep.pair_input()?)?))
    }
}

/// Loss of `net` on a pair of contrastive batches.
pub fn loss(net: &mut RatioNet, cfg: &LossConfig, indep: &ContrastiveBatch, dep: &ContrastiveBatch) -> Result<f64> {
    let (hi, hd) = batch_logits(net, cfg, indep, dep)?;
    Ok(loss_from_logits(cfg, &hi, &hd, dep.target())?.loss)
}

/// Loss and parameter gradient; requires the network in train mode.
pub fn loss_and_grad(
    net: &mut RatioNet,
    cfg: &LossConfig,
    indep: &ContrastiveBatch,
    dep: &ContrastiveBatch,
) -> Result<(f64, Vec<f64>)> {
    if net.mode() != crate::nn::Mode::Train {
        return Err(Error::State("gradients need the network in train mode".into()));
    }
    let (hi, hd) = batch_logits(net, cfg, indep, dep)?;
    let l = loss_from_logits(cfg, &hi, &hd, dep.target())?;
    let mut upstream = l.grad_indep;
    upstream.extend(l.grad_dep);
    let g = net.backward(&upstream)?;
    Ok((l.loss, g))
}

/// NRE-C loss of `net`.
pub fn loss_nrec(net: &mut RatioNet, indep: &ContrastiveBatch, dep: &ContrastiveBatch, gamma: f64) -> Result<f64> {
    loss(net, &LossConfig::nrec(gamma, dep.k())?, indep, dep)
}

/// NRE-A loss of `net`; both batches must have `K = 1`.
pub fn loss_nrea(net: &mut RatioNet, indep: &ContrastiveBatch, dep: &ContrastiveBatch) -> Result<f64> {
    loss(net, &LossConfig::nrea(), indep, dep)
}

/// NRE-B loss of `net` on the dependent batch.
pub fn loss_nreb(net: &mut RatioNet, dep: &ContrastiveBatch) -> Result<f64> {
    let cfg = LossConfig::nreb(dep.k())?;
    loss(net, &cfg, dep, dep)
}

/// Loss of the constant classifier `h = 0` under NRE-C:
/// `(1/(1+g)) ln(1+g) + (g/(1+g)) ln(K(1+g)/g)`.
pub fn nrec_zero_logit_loss(gamma: f64, k: usize) -> f64 {
    let kf = k as f64;
    (1.0 + gamma).ln() / (1.0 + gamma) + gamma / (1.0 + gamma) * (kf * (1.0 + gamma) / gamma).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(h: &[f64], g: f64, k: usize) -> Vec<f64> {
        nrec_class_log_probs(h, g, k).unwrap().iter().map(|v| v.exp()).collect()
    }

    #[test]
    fn class_probability_examples() {
        let p = probs(&[0.0], 1.0, 1);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        for v in probs(&[0.0; 3], 3.0, 3) {
            assert!((v - 0.25).abs() < 1e-15);
        }
        let p = probs(&[0.0, 3f64.ln()], 2.0, 2);
        for (a, b) in p.iter().zip([0.2, 0.2, 0.6]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn class_probability_errors() {
        assert!(matches!(nrec_class_log_probs(&[f64::NAN], 1.0, 1), Err(Error::Numeric(_))));
        assert!(matches!(nrec_class_log_probs(&[0.0, 1.0], 1.0, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_logit_losses() {
        let z = vec![0.0; 8];
        let t = vec![0; 8];
        let l = nrec_loss_from_logits(&z, &z, &t, 1.0, 1).unwrap().loss;
        assert!((l - 2f64.ln()).abs() < 1e-15);
        let l = nrec_loss_from_logits(&z, &z, &[1; 4], 1.0, 2).unwrap().loss;
        assert!((l - 1.5 * 2f64.ln()).abs() < 1e-15);
        for g in [0.1, 1.0, 7.0] {
            let l = nrec_loss_from_logits(&z, &z, &t, g, 1).unwrap().loss;
            assert!((l - nrec_zero_logit_loss(g, 1)).abs() < 1e-14);
        }
        let l = nreb_loss_from_logits(&[0.0; 10], &[4, 4], 5).unwrap().loss;
        assert!((l - 5f64.ln()).abs() < 1e-15);
        assert!((nrea_loss_from_logits(&z, &z).unwrap().loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn perfect_classifiers() {
        assert!(nrea_loss_from_logits(&[-20.0; 4], &[20.0; 4]).unwrap().loss < 1e-8);
        let mut h = vec![0.0; 5];
        h[2] = 30.0;
        assert!(nreb_loss_from_logits(&h, &[2], 5).unwrap().loss < 1e-8);
    }

    #[test]
    fn logit_gradients_match_finite_differences() {
        let hi = [0.3, -1.2, 0.8, 2.0, -0.5, 0.1];
        let hd = [1.1, 0.4, -0.7, 0.2, 1.5, -2.2];
        let target = [2, 0];
        let (g, k) = (2.5, 3);
        let l = nrec_loss_from_logits(&hi, &hd, &target, g, k).unwrap();
        let eps = 1e-6;
        for i in 0..6 {
            let mut a = hi;
            a[i] += eps;
            let mut b = hi;
            b[i] -= eps;
            let fd = (nrec_loss_from_logits(&a, &hd, &target, g, k).unwrap().loss
                - nrec_loss_from_logits(&b, &hd, &target, g, k).unwrap().loss)
                / (2.0 * eps);
            assert!((fd - l.grad_indep[i]).abs() < 1e-9);
            let mut a = hd;
            a[i] += eps;
            let mut b = hd;
            b[i] -= eps;
            let fd = (nrec_loss_from_logits(&hi, &a, &target, g, k).unwrap().loss
                - nrec_loss_from_logits(&hi, &b, &target, g, k).unwrap().loss)
                / (2.0 * eps);
            assert!((fd - l.grad_dep[i]).abs() < 1e-9);
        }
        let lb = nreb_loss_from_logits(&hd, &target, k).unwrap();
        let la = nrea_loss_from_logits(&hi, &hd).unwrap();
        for i in 0..6 {
            let mut a = hd;
            a[i] += eps;
            let mut b = hd;
            b[i] -= eps;
            let fd = (nreb_loss_from_logits(&a, &target, k).unwrap().loss
                - nreb_loss_from_logits(&b, &target, k).unwrap().loss)
                / (2.0 * eps);
            assert!((fd - lb.grad_dep[i]).abs() < 1e-9);
            let fd = (nrea_loss_from_logits(&hi, &a).unwrap().loss - nrea_loss_from_logits(&hi, &b).unwrap().loss)
                / (2.0 * eps);
            assert!((fd - la.grad_dep[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn config_rules() {
        assert!(LossConfig::nrec(0.0, 1).is_err());
        assert!(LossConfig::nrec(1.0, 0).is_err());
        let a = LossConfig::new(Variant::A, 5.0, 7).unwrap();
        assert_eq!((a.gamma, a.k), (1.0, 1));
        let c = LossConfig::nrec(3.0, 4).unwrap();
        assert!((c.p0() + 4.0 * c.pk() - 1.0).abs() < 1e-15);
        assert_eq!("nre-c".parse::<Variant>().unwrap(), Variant::C);
    }
}
