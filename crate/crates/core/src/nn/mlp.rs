//! Small ReLU classifier used by the two-sample and importance diagnostics.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{gemm_ab, gemm_abt, gemm_atb, AdamState, Matrix};
use crate::math::{log_sigmoid, sigmoid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Width of each hidden layer.
    pub hidden: usize,
    pub hidden_layers: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once the epoch training loss has not improved by `tol` for this many epochs.
    pub patience: usize,
    pub tol: f64,
    /// L2 penalty on weights, scaled by the minibatch size.
    pub l2: f64,
}

impl ClassifierConfig {
    /// Two hidden layers of `10 * dim` units.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            hidden: 10 * dim.max(1),
            hidden_layers: 2,
            lr: 1e-3,
            batch_size: 200,
            max_epochs: 1000,
            patience: 10,
            tol: 1e-4,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    w: usize,
    b: usize,
    inp: usize,
    out: usize,
}

/// Binary classifier returning logits for class 1.
#[derive(Debug, Clone)]
pub struct Classifier {
    layers: Vec<Layer>,
    params: Vec<f64>,
    input_dim: usize,
    /// Input standardization computed on the training set.
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Classifier {
    /// Glorot-uniform initialization.
    pub fn new<R: rand::Rng + ?Sized>(input_dim: usize, cfg: &ClassifierConfig, rng: &mut R) -> Result<Self> {
        if input_dim == 0 || cfg.hidden == 0 {
            return Err(Error::Config("classifier dimensions must be positive".into()));
        }
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat_n(cfg.hidden, cfg.hidden_layers));
        dims.push(1);
        let mut layers = Vec::new();
        let mut at = 0;
        for w in dims.windows(2) {
            layers.push(Layer {
                w: at,
                b: at + w[0] * w[1],
                inp: w[0],
                out: w[1],
            });
            at += w[0] * w[1] + w[1];
        }
        let mut params = vec![0.0; at];
        for l in &layers {
            let bound = (6.0 / (l.inp + l.out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for p in &mut params[l.w..l.b + l.out] {
                *p = dist.sample(rng);
            }
        }
        Ok(Self {
            layers,
            params,
            input_dim,
            mean: vec![0.0; input_dim],
            std: vec![1.0; input_dim],
        })
    }

    /// Trains on labels `y` in {0, 1} with optional per-example weights.
    /// Returns the number of epochs run.
    pub fn fit<R: rand::Rng + ?Sized>(
        &mut self,
        x: &Matrix,
        y: &[f64],
        weights: Option<&[f64]>,
        cfg: &ClassifierConfig,
        rng: &mut R,
    ) -> Result<usize> {
        let n = x.rows();
        if x.cols() != self.input_dim || y.len() != n || weights.is_some_and(|w| w.len() != n) {
            return Err(Error::Shape("classifier inputs, labels and weights disagree".into()));
        }
        if n == 0 {
            return Ok(0);
        }
        self.mean = x.column_means();
        self.std = x
            .column_variances()
            .iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        let xs = self.standardize(x);
        let mut adam = AdamState::new(self.params.len(), cfg.lr);
        let bs = cfg.batch_size.clamp(1, n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        let mut stale = 0;
        let mut epochs = 0;
        for _ in 0..cfg.max_epochs {
            epochs += 1;
            order.shuffle(rng);
            let mut total = 0.0;
            for chunk in order.chunks(bs) {
                let xb = xs.select_rows(chunk);
                let yb: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
                let wb: Vec<f64> = chunk.iter().map(|&i| weights.map_or(1.0, |w| w[i])).collect();
                let (loss, grad) = self.loss_and_grad(&xb, &yb, &wb, cfg.l2)?;
                adam.step(&mut self.params, &grad)?;
                total += loss * chunk.len() as f64;
            }
            let epoch_loss = total / n as f64;
            if !epoch_loss.is_finite() {
                return Err(Error::Numeric("classifier loss diverged".into()));
            }
            if epoch_loss > best - cfg.tol {
                stale += 1;
            } else {
                stale = 0;
            }
            best = best.min(epoch_loss);
            if stale >= cfg.patience {
                break;
            }
        }
        Ok(epochs)
    }

    pub fn logits(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "classifier expects {} columns, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        let xs = self.standardize(x);
        let acts = self.forward(&xs);
        Ok(acts.last().cloned().unwrap_or_default())
    }

    fn standardize(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        let c = x.cols();
        for row in out.data_mut().chunks_exact_mut(c) {
            for j in 0..c {
                row[j] = (row[j] - self.mean[j]) / self.std[j];
            }
        }
        out
    }

    /// Activations of every layer; the last entry holds the logits.
    fn forward(&self, x: &Matrix) -> Vec<Vec<f64>> {
        let n = x.rows();
        let mut acts: Vec<Vec<f64>> = vec![x.data().to_vec()];
        for (li, l) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; n * l.out];
            let bias = &self.params[l.b..l.b + l.out];
            for row in z.chunks_exact_mut(l.out) {
                row.copy_from_slice(bias);
            }
            gemm_abt(acts.last().unwrap(), &self.params[l.w..l.b], &mut z, n, l.inp, l.out, 1.0);
            if li + 1 < self.layers.len() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    fn loss_and_grad(&self, x: &Matrix, y: &[f64], w: &[f64], l2: f64) -> Result<(f64, Vec<f64>)> {
        let n = x.rows();
        let nf = n as f64;
        let acts = self.forward(x);
        let f = acts.last().unwrap();
        let mut loss = 0.0;
        let mut d: Vec<f64> = Vec::with_capacity(n);
        for i in 0..n {
            // -(y log s(f) + (1-y) log(1-s(f)))
            loss -= w[i] * (y[i] * log_sigmoid(f[i]) + (1.0 - y[i]) * log_sigmoid(-f[i]));
            d.push(w[i] * (sigmoid(f[i]) - y[i]) / nf);
        }
        loss /= nf;
        let mut g = vec![0.0; self.params.len()];
        for (li, l) in self.layers.iter().enumerate().rev() {
            let a_prev = &acts[li];
            gemm_atb(&d, a_prev, &mut g[l.w..l.b], n, l.out, l.inp, 0.0);
            for row in d.chunks_exact(l.out) {
                for (gb, v) in g[l.b..l.b + l.out].iter_mut().zip(row) {
                    *gb += v;
                }
            }
            if l2 > 0.0 {
                for k in l.w..l.b {
                    loss += 0.5 * l2 * self.params[k] * self.params[k] / nf;
                    g[k] += l2 * self.params[k] / nf;
                }
            }
            if li > 0 {
                let mut dn = vec![0.0; n * l.inp];
                gemm_ab(&d, &self.params[l.w..l.b], &mut dn, n, l.out, l.inp, 0.0);
                for (v, a) in dn.iter_mut().zip(a_prev) {
                    if *a <= 0.0 {
                        *v = 0.0;
                    }
                }
                d = dn;
            }
        }
        Ok((loss, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::stream(1, 0);
        let cfg = ClassifierConfig {
            hidden: 4,
            ..ClassifierConfig::for_dim(2)
        };
        let mut c = Classifier::new(2, &cfg, &mut r).unwrap();
        let x = super::super::random_input(6, 2, &mut r);
        let y = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let w = [1.0, 0.5, 2.0, 1.0, 1.0, 0.3];
        let (_, g) = c.loss_and_grad(&x, &y, &w, 1e-2).unwrap();
        for k in 0..c.params.len() {
            let p0 = c.params[k];
            c.params[k] = p0 + 1e-6;
            let lp = c.loss_and_grad(&x, &y, &w, 1e-2).unwrap().0;
            c.params[k] = p0 - 1e-6;
            let lm = c.loss_and_grad(&x, &y, &w, 1e-2).unwrap().0;
            c.params[k] = p0;
            let fd = (lp - lm) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-6, "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn separates_distinct_clusters() {
        let mut r = rng::stream(2, 0);
        let n = 200;
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = if i % 2 == 0 { -3.0 } else { 3.0 };
            rows.push([c + rand::Rng::random::<f64>(&mut r) - 0.5]);
            y.push((i % 2) as f64);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let cfg = ClassifierConfig::for_dim(1);
        let mut c = Classifier::new(1, &cfg, &mut r).unwrap();
        c.fit(&x, &y, None, &cfg, &mut r).unwrap();
        let f = c.logits(&x).unwrap();
        let acc = f.iter().zip(&y).filter(|(f, y)| (**f > 0.0) == (**y > 0.5)).count();
        assert_eq!(acc, n);
    }
}
