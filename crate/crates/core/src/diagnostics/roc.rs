use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Receiver operating characteristic, ordered from threshold `+inf` (0, 0)
/// down to `-inf` (1, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub auc: f64,
}

impl RocReport {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.fpr.iter().copied().zip(self.tpr.iter().copied()).collect()
    }
}

/// Weighted ROC of `scores` for binary `labels` (true = positive class).
/// Tied scores form a single step, so the trapezoidal AUC counts ties as half.
pub fn roc_curve(scores: &[f64], labels: &[bool], weights: Option<&[f64]>) -> Result<RocReport> {
    let n = scores.len();
    if labels.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::Shape("scores, labels and weights must have equal length".into()));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut pos_total, mut neg_total) = (0.0, 0.0);
    for i in 0..n {
        if !(w(i) >= 0.0 && w(i).is_finite()) || scores[i].is_nan() {
            return Err(Error::Diagnostic("ROC needs finite non-negative weights and scores".into()));
        }
        if labels[i] {
            pos_total += w(i);
        } else {
            neg_total += w(i);
        }
    }
    if pos_total <= 0.0 || neg_total <= 0.0 {
        return Err(Error::Diagnostic("ROC needs positive weight in both classes".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut thresholds = vec![f64::INFINITY];
    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < n {
        let s = scores[order[i]];
        while i < n && scores[order[i]] == s {
            if labels[order[i]] {
                tp += w(order[i]);
            } else {
                fp += w(order[i]);
            }
            i += 1;
        }
        thresholds.push(s);
        tpr.push((tp / pos_total).min(1.0));
        fpr.push((fp / neg_total).min(1.0));
    }
    let auc = fpr
        .windows(2)
        .zip(tpr.windows(2))
        .map(|(f, t)| (f[1] - f[0]) * 0.5 * (t[0] + t[1]))
        .sum();
    Ok(RocReport {
        thresholds,
        tpr,
        fpr,
        auc,
    })
}
