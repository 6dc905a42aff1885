use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{RuleTag, SigmaSet};
use crate::error::{Error, Result};
use crate::kron::{spd_factor_with, JitterPolicy};

/// Scaled unscented transformation parameters.
///
/// `kappa = None` means the dimension-dependent default `3 − n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: Option<f64>,
}

impl Default for UtParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: None,
        }
    }
}

impl UtParams {
    pub fn kappa_for(&self, n: usize) -> f64 {
        self.kappa.unwrap_or(3.0 - n as f64)
    }

    pub fn lambda(&self, n: usize) -> f64 {
        self.alpha * self.alpha * (n as f64 + self.kappa_for(n)) - n as f64
    }

    /// `(w0_mean, w0_cov, w_wing)`.
    pub fn weights(&self, n: usize) -> Result<(f64, f64, f64)> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParams(format!("alpha must be > 0, got {}", self.alpha)));
        }
        let lambda = self.lambda(n);
        let spread = n as f64 + lambda;
        if !(spread > 0.0) {
            return Err(Error::InvalidParams(format!(
                "n + lambda must be > 0 (n = {n}, lambda = {lambda})"
            )));
        }
        let w0 = lambda / spread;
        Ok((
            w0,
            w0 + (1.0 - self.alpha * self.alpha + self.beta),
            0.5 / spread,
        ))
    }
}

pub fn ut_points(mean: &DVector<f64>, cov: &DMatrix<f64>, params: &UtParams) -> Result<SigmaSet> {
    ut_points_with(mean, cov, params, &JitterPolicy::default())
}

pub fn ut_points_with(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    params: &UtParams,
    policy: &JitterPolicy,
) -> Result<SigmaSet> {
    let n = mean.len();
    if cov.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "ut_points: mean {n}, covariance {:?}",
            cov.shape()
        )));
    }
    let (w0m, w0c, wi) = params.weights(n)?;
    let spread = n as f64 + params.lambda(n);
    let c = spd_factor_with(&(cov * spread), policy)?;
    let count = 2 * n + 1;
    let mut points = DMatrix::zeros(n, count);
    points.set_column(0, mean);
    for i in 0..n {
        let col = c.column(i);
        points.set_column(1 + 2 * i, &(mean + col));
        points.set_column(2 + 2 * i, &(mean - col));
    }
    let mut w_mean = DVector::from_element(count, wi);
    let mut w_cov = DVector::from_element(count, wi);
    w_mean[0] = w0m;
    w_cov[0] = w0c;
    Ok(SigmaSet {
        points,
        w_mean,
        w_cov,
        rule: RuleTag::Ut,
        generating_mean: mean.clone(),
        generating_cov: cov.clone(),
        centers: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_hand_example() {
        let p = UtParams {
            alpha: 1.0,
            beta: 0.0,
            kappa: Some(2.0),
        };
        let s = ut_points(&DVector::zeros(1), &DMatrix::identity(1, 1), &p).unwrap();
        assert_eq!(p.lambda(1), 2.0);
        assert_eq!(s.len(), 3);
        assert_eq!(s.points[(0, 0)], 0.0);
        assert_relative_eq!(s.points[(0, 1)], 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(s.points[(0, 2)], -(3f64.sqrt()), epsilon = 1e-15);
        assert_relative_eq!(s.w_mean[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(s.w_mean[1], 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(s.w_mean[2], 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn weights_sum_to_one_and_moments_recovered() {
        let mean = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.3, 2.0, 0.1, -0.4, 0.0, 0.7]);
        let cov = &a * a.transpose();
        for params in [
            UtParams::default(),
            UtParams {
                alpha: 0.5,
                beta: 2.0,
                kappa: Some(1.0),
            },
            UtParams {
                alpha: 1.0,
                beta: 0.0,
                kappa: Some(0.0),
            },
        ] {
            let s = ut_points(&mean, &cov, &params).unwrap();
            assert_relative_eq!(s.w_mean.sum(), 1.0, epsilon = 1e-12);
            let m = &s.points * &s.w_mean;
            assert_relative_eq!(m, mean, epsilon = 1e-12);
            // covariance under the mean weights (w_cov adds the β term at the center,
            // which sits exactly on the mean)
            let mut p = DMatrix::zeros(3, 3);
            for j in 0..s.len() {
                let d = s.points.column(j) - &mean;
                p += &d * d.transpose() * s.w_cov[j];
            }
            assert_relative_eq!(p, cov, epsilon = 1e-10);
        }
    }

    #[test]
    fn odd_moments_vanish_exactly() {
        let s = ut_points(
            &DVector::zeros(3),
            &DMatrix::identity(3, 3),
            &UtParams::default(),
        )
        .unwrap();
        for e in [[1, 0, 0], [3, 0, 0], [1, 2, 0], [1, 1, 1], [0, 5, 0]] {
            assert_eq!(s.raw_moment(&e), 0.0);
        }
    }

    #[test]
    fn invalid_lambda_rejected() {
        let p = UtParams {
            alpha: 1.0,
            beta: 2.0,
            kappa: Some(-3.0),
        };
        assert!(ut_points(&DVector::zeros(3), &DMatrix::identity(3, 3), &p).is_err());
        let p = UtParams {
            alpha: 0.0,
            ..UtParams::default()
        };
        assert!(p.weights(2).is_err());
    }
}
