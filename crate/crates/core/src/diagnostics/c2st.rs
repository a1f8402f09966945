use rand::seq::SliceRandom;
use rand::RngCore;

use crate::nn::{Classifier, ClassifierConfig};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct C2stConfig {
    pub folds: usize,
    pub min_samples: usize,
    /// Classifier settings; `None` uses two hidden layers of `10 * dim` units.
    pub classifier: Option<ClassifierConfig>,
}

impl Default for C2stConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            min_samples: 500,
            classifier: None,
        }
    }
}

/// Classifier two-sample test: cross-validated accuracy of an MLP telling
/// `p` samples from `q` samples. 0.5 means indistinguishable.
pub fn c2st(p: &Matrix, q: &Matrix, rng: &mut dyn RngCore) -> Result<f64> {
    c2st_with(p, q, &C2stConfig::default(), rng)
}

pub fn c2st_with(p: &Matrix, q: &Matrix, cfg: &C2stConfig, rng: &mut dyn RngCore) -> Result<f64> {
    if p.cols() != q.cols() {
        return Err(Error::Shape(format!("sample dimensions differ: {} vs {}", p.cols(), q.cols())));
    }
    if p.rows() != q.rows() {
        return Err(Error::Shape(format!("sample counts differ: {} vs {}", p.rows(), q.rows())));
    }
    if p.rows() < cfg.min_samples || cfg.folds < 2 || p.rows() < cfg.folds {
        return Err(Error::Config(format!(
            "C2ST needs at least {} samples per side and 2 folds",
            cfg.min_samples
        )));
    }
    // z-score both sides with the statistics of p
    let mean = p.column_means();
    let std: Vec<f64> = p
        .column_variances()
        .iter()
        .map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 })
        .collect();
    let z = |m: &Matrix| {
        let mut out = m.clone();
        let c = m.cols();
        for row in out.data_mut().chunks_exact_mut(c) {
            for j in 0..c {
                row[j] = (row[j] - mean[j]) / std[j];
            }
        }
        out
    };
    let data = z(p).vstack(&z(q))?;
    let n = p.rows();
    let label = |i: usize| if i < n { 0.0 } else { 1.0 };
    // stratified folds
    let mut a: Vec<usize> = (0..n).collect();
    let mut b: Vec<usize> = (n..2 * n).collect();
    a.shuffle(rng);
    b.shuffle(rng);
    let fold_of = |pos: usize| pos * cfg.folds / n;
    let ccfg = cfg.classifier.clone().unwrap_or_else(|| ClassifierConfig::for_dim(p.cols()));
    let mut accs = Vec::with_capacity(cfg.folds);
    for f in 0..cfg.folds {
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (pos, (&i, &j)) in a.iter().zip(&b).enumerate() {
            if fold_of(pos) == f {
                test.extend([i, j]);
            } else {
                train.extend([i, j]);
            }
        }
        let xtr = data.select_rows(&train);
        let ytr: Vec<f64> = train.iter().map(|&i| label(i)).collect();
        let mut clf = Classifier::new(p.cols(), &ccfg, rng)?;
        clf.fit(&xtr, &ytr, None, &ccfg, rng)?;
        let scores = clf.logits(&data.select_rows(&test))?;
        let correct = test
            .iter()
            .zip(&scores)
            .filter(|(&i, &s)| (s > 0.0) == (label(i) > 0.5))
            .count();
        accs.push(correct as f64 / test.len() as f64);
    }
    Ok(accs.iter().sum::<f64>() / accs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(n: usize, d: usize, shift: f64, r: &mut dyn RngCore) -> Matrix {
        let v = (0..n * d).map(|_| { let z: f64 = StandardNormal.sample(&mut *r); shift + z }).collect::<Vec<f64>>();
        Matrix::from_vec(n, d, v).unwrap()
    }

    #[test]
    fn identical_distributions_are_near_chance() {
        let mut r = rng::stream(1, 0);
        let p = normal(1000, 2, 0.0, &mut r);
        let q = normal(1000, 2, 0.0, &mut r);
        let acc = c2st(&p, &q, &mut r).unwrap();
        assert!((0.45..=0.55).contains(&acc), "{acc}");
    }

    #[test]
    fn disjoint_distributions_are_separated() {
        let mut r = rng::stream(2, 0);
        let p = normal(500, 1, 0.0, &mut r);
        let q = normal(500, 1, 10.0, &mut r);
        assert!(c2st(&p, &q, &mut r).unwrap() > 0.99);
    }

    #[test]
    fn shape_errors() {
        let mut r = rng::stream(3, 0);
        let p = normal(500, 1, 0.0, &mut r);
        let q = normal(500, 2, 0.0, &mut r);
        assert!(matches!(c2st(&p, &q, &mut r), Err(Error::Shape(_))));
        let q = normal(20, 1, 0.0, &mut r);
        assert!(matches!(c2st(&p, &q, &mut r), Err(Error::Shape(_))));
    }
}
