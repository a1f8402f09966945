use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::roc::{roc_curve, RocReport};
use crate::math::logsumexp;
use crate::nn::{Classifier, ClassifierConfig};
use crate::posterior::LogRatio;
use crate::tasks::{sample_joint, simulate, Task};
use crate::{Error, Matrix, Result};

/// Outcome of the importance-sampling diagnostic at one `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceDiagnostic {
    pub theta: Vec<f64>,
    /// Held-out ROC of `p(x|theta)` against `p(x)` reweighted by the ratio.
    pub weighted: RocReport,
    /// Held-out ROC of `p(x|theta)` against unweighted `p(x)`.
    pub power: RocReport,
    /// Kish effective sample size of the negative-class weights (training half).
    pub effective_sample_size: f64,
}

impl ImportanceDiagnostic {
    /// The ratio passes when the weighted AUC is inside `band` and the
    /// unweighted problem was hard enough to be detected (`power.auc > min_power`).
    pub fn passes(&self, band: (f64, f64), min_power: f64) -> bool {
        self.power.auc > min_power && self.weighted.auc >= band.0 && self.weighted.auc <= band.1
    }
}

/// Mean-one weights `exp(h_i) / mean(exp(h))`, or a diagnostic error when
/// all of them vanish.
fn normalized_weights(h: &[f64]) -> Result<Vec<f64>> {
    let lse = logsumexp(h);
    if !lse.is_finite() {
        return Err(Error::Diagnostic("importance weights are degenerate (all zero or infinite)".into()));
    }
    let ln_n = (h.len() as f64).ln();
    Ok(h.iter().map(|v| (v - lse + ln_n).exp()).collect())
}

fn fit_and_score(
    pos_train: &Matrix,
    neg_train: &Matrix,
    neg_train_w: Option<&[f64]>,
    pos_test: &Matrix,
    neg_test: &Matrix,
    neg_test_w: Option<&[f64]>,
    rng: &mut dyn RngCore,
) -> Result<RocReport> {
    let n = pos_train.rows();
    let x = pos_train.vstack(neg_train)?;
    let y: Vec<f64> = (0..x.rows()).map(|i| if i < n { 1.0 } else { 0.0 }).collect();
    let w: Option<Vec<f64>> = neg_train_w.map(|nw| std::iter::repeat_n(1.0, n).chain(nw.iter().copied()).collect());
    let cfg = ClassifierConfig::for_dim(x.cols());
    let mut clf = Classifier::new(x.cols(), &cfg, rng)?;
    clf.fit(&x, &y, w.as_deref(), &cfg, rng)?;
    let test = pos_test.vstack(neg_test)?;
    let scores = clf.logits(&test)?;
    let m = pos_test.rows();
    let labels: Vec<bool> = (0..test.rows()).map(|i| i < m).collect();
    let tw: Option<Vec<f64>> = neg_test_w.map(|nw| std::iter::repeat_n(1.0, m).chain(nw.iter().copied()).collect());
    roc_curve(&scores, &labels, tw.as_deref())
}

/// Trains a classifier to tell `x ~ p(x|theta)` from `x ~ p(x)` weighted by
/// `r(x|theta)`, and reports the held-out ROC. An exact ratio makes the two
/// classes identical (AUC near 0.5). A second, unweighted classifier measures
/// how separable the classes are without weights.
pub fn importance_diagnostic(
    ratio: &dyn LogRatio,
    task: &dyn Task,
    theta: &[f64],
    n_per_class: usize,
    rng: &mut dyn RngCore,
) -> Result<ImportanceDiagnostic> {
    if n_per_class < 100 {
        return Err(Error::Config("importance diagnostic needs at least 100 samples per class".into()));
    }
    if theta.len() != task.dim_theta() {
        return Err(Error::Shape("theta does not match the task".into()));
    }
    let n = n_per_class;
    let th = Matrix::from_rows(&vec![theta.to_vec(); 2 * n])?;
    let pos = simulate(task, &th, rng)?;
    let neg = sample_joint(task, 2 * n, rng).x;
    let h = ratio.log_ratio_pairs(&th, &neg)?;
    let (h_train, h_test) = h.split_at(n);
    let w_train = normalized_weights(h_train)?;
    let w_test = normalized_weights(h_test)?;
    let ess = {
        let s: f64 = w_train.iter().sum();
        let s2: f64 = w_train.iter().map(|w| w * w).sum();
        s * s / s2
    };
    let train_idx: Vec<usize> = (0..n).collect();
    let test_idx: Vec<usize> = (n..2 * n).collect();
    let (pos_tr, pos_te) = (pos.select_rows(&train_idx), pos.select_rows(&test_idx));
    let (neg_tr, neg_te) = (neg.select_rows(&train_idx), neg.select_rows(&test_idx));
    let weighted = fit_and_score(&pos_tr, &neg_tr, Some(&w_train), &pos_te, &neg_te, Some(&w_test), rng)?;
    let power = fit_and_score(&pos_tr, &neg_tr, None, &pos_te, &neg_te, None, rng)?;
    Ok(ImportanceDiagnostic {
        theta: theta.to_vec(),
        weighted,
        power,
        effective_sample_size: ess,
    })
}

/// Self-normalized importance weights of `r` and of `r / C(x)` over shared
/// draws `x ~ p(x)`. Normalizing does not remove an `x`-dependent factor, so
/// the two weight sets differ unless `C` is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IllPosedness {
    pub weights_1: Vec<f64>,
    pub weights_2: Vec<f64>,
    pub max_abs_diff: f64,
}

pub fn nreb_illposedness_demo(
    ratio: &dyn LogRatio,
    log_bias: &dyn Fn(&[f64]) -> f64,
    theta: &[f64],
    task: &dyn Task,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<IllPosedness> {
    if n == 0 {
        return Ok(IllPosedness {
            weights_1: Vec::new(),
            weights_2: Vec::new(),
            max_abs_diff: 0.0,
        });
    }
    let x = sample_joint(task, n, rng).x;
    let th = Matrix::from_rows(&vec![theta.to_vec(); n])?;
    let h = ratio.log_ratio_pairs(&th, &x)?;
    let h2: Vec<f64> = h.iter().enumerate().map(|(i, v)| v - log_bias(x.row(i))).collect();
    let self_norm = |h: &[f64]| -> Result<Vec<f64>> {
        let l = logsumexp(h);
        if !l.is_finite() {
            return Err(Error::Diagnostic("importance weights are degenerate".into()));
        }
        Ok(h.iter().map(|v| (v - l).exp()).collect())
    };
    let weights_1 = self_norm(&h)?;
    let weights_2 = self_norm(&h2)?;
    let max_abs_diff = weights_1
        .iter()
        .zip(&weights_2)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(IllPosedness {
        weights_1,
        weights_2,
        max_abs_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::AnalyticRatio;
    use crate::rng;
    use crate::tasks::task_by_name;

    #[test]
    fn constant_bias_changes_nothing() {
        let task = task_by_name("conjugate_gaussian").unwrap();
        let r = AnalyticRatio::new(task.clone()).unwrap();
        let d = nreb_illposedness_demo(&r, &|_| 0.0, &[0.5], task.as_ref(), 100, &mut rng::stream(1, 0)).unwrap();
        assert_eq!(d.max_abs_diff, 0.0);
        let d = nreb_illposedness_demo(&r, &|_| 3.0, &[0.5], task.as_ref(), 100, &mut rng::stream(1, 0)).unwrap();
        assert!(d.max_abs_diff < 1e-15);
    }

    #[test]
    fn x_dependent_bias_changes_weights() {
        let task = task_by_name("conjugate_gaussian").unwrap();
        let r = AnalyticRatio::new(task.clone()).unwrap();
        let d = nreb_illposedness_demo(&r, &|x| x[0], &[0.5], task.as_ref(), 100, &mut rng::stream(2, 0)).unwrap();
        assert!(d.max_abs_diff > 0.01);
        let s: f64 = d.weights_2.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_draw_weights_are_one() {
        let task = task_by_name("conjugate_gaussian").unwrap();
        let r = AnalyticRatio::new(task.clone()).unwrap();
        let d = nreb_illposedness_demo(&r, &|x| x[0], &[0.5], task.as_ref(), 1, &mut rng::stream(3, 0)).unwrap();
        assert_eq!((d.weights_1[0], d.weights_2[0], d.max_abs_diff), (1.0, 1.0, 0.0));
    }

    #[test]
    fn degenerate_weights_are_reported() {
        assert!(matches!(normalized_weights(&[f64::NEG_INFINITY; 3]), Err(Error::Diagnostic(_))));
    }
}
