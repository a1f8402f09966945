use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::{Error, Result};

pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub theta_mean: Vec<f64>,
    pub theta_std: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
}

fn column_stats(m: &Matrix, what: &str) -> (Vec<f64>, Vec<f64>) {
    let mean = m.column_means();
    let std = m
        .column_variances()
        .into_iter()
        .enumerate()
        .map(|(j, v)| {
            let s = v.sqrt();
            if s < STD_FLOOR {
                log::warn!("{what}_{j} has (near) zero variance; std floored at {STD_FLOOR:e}");
                STD_FLOOR
            } else {
                s
            }
        })
        .collect();
    (mean, std)
}

fn apply_cols(m: &Matrix, mean: &[f64], std: &[f64]) -> Result<Matrix> {
    if m.cols() != mean.len() {
        return Err(Error::Shape(format!(
            "standardizer fitted on {} columns, got {}",
            mean.len(),
            m.cols()
        )));
    }
    let mut out = m.clone();
    let c = m.cols();
    if c > 0 {
        for row in out.data_mut().chunks_exact_mut(c) {
            for j in 0..c {
                row[j] = (row[j] - mean[j]) / std[j];
            }
        }
    }
    Ok(out)
}

impl Standardizer {
    /// Per-column mean and population standard deviation.
    pub fn fit(theta: &Matrix, x: &Matrix) -> Result<Self> {
        if theta.is_empty() || x.is_empty() {
            return Err(Error::Shape("cannot fit a standardizer on an empty batch".into()));
        }
        let (theta_mean, theta_std) = column_stats(theta, "theta");
        let (x_mean, x_std) = column_stats(x, "x");
        Ok(Self {
            theta_mean,
            theta_std,
            x_mean,
            x_std,
        })
    }

    /// Identity transform for the given dimensions.
    pub fn identity(dim_theta: usize, dim_x: usize) -> Self {
        Self {
            theta_mean: vec![0.0; dim_theta],
            theta_std: vec![1.0; dim_theta],
            x_mean: vec![0.0; dim_x],
            x_std: vec![1.0; dim_x],
        }
    }

    pub fn apply_theta(&self, theta: &Matrix) -> Result<Matrix> {
        apply_cols(theta, &self.theta_mean, &self.theta_std)
    }

    pub fn apply_x(&self, x: &Matrix) -> Result<Matrix> {
        apply_cols(x, &self.x_mean, &self.x_std)
    }

    pub fn apply(&self, theta: &Matrix, x: &Matrix) -> Result<(Matrix, Matrix)> {
        Ok((self.apply_theta(theta)?, self.apply_x(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_statistics() {
        let t = Matrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let x = Matrix::from_rows(&[[5.0], [5.0]]).unwrap();
        let s = Standardizer::fit(&t, &x).unwrap();
        assert_eq!(s.theta_mean, vec![1.0]);
        assert_eq!(s.theta_std, vec![1.0]);
        assert_eq!(s.x_mean, vec![5.0]);
        assert_eq!(s.x_std, vec![STD_FLOOR]);
        let (a, b) = s.apply(&t, &x).unwrap();
        assert_eq!(a.data(), &[-1.0, 1.0]);
        assert_eq!(b.data(), &[0.0, 0.0]);
    }

    #[test]
    fn empty_batch_is_rejected() {
        assert!(Standardizer::fit(&Matrix::zeros(0, 1), &Matrix::zeros(0, 1)).is_err());
    }
}
