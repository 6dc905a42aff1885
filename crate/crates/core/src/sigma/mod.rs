//! Deterministic point sets: scaled unscented (UT) and conjugate unscented (CUT) rules.
//!
//! Every set is laid out as `centers` unpaired leading points followed by
//! `(p, 2·mean − p)` pairs, so odd central moments cancel pair by pair.

mod cut;
mod cut_solver;
mod cut_table;
mod ut;

pub use cut::{cut_points, cut_rule, gaussian_raw_moment, CutFamily, CutRule, Pattern};
pub use cut_solver::{solve_cut_rule, SolverOptions};
pub use cut_table::{CutTable, CUT_TABLE_FORMAT, CUT_TABLE_VERSION};
pub use ut::{ut_points, ut_points_with, UtParams};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kron::spd_factor_with;
use crate::kron::JitterPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleTag {
    Ut,
    Cut4,
    Cut6,
    Cut8,
}

impl RuleTag {
    pub fn cut(order: usize) -> Result<Self> {
        match order {
            4 => Ok(RuleTag::Cut4),
            6 => Ok(RuleTag::Cut6),
            8 => Ok(RuleTag::Cut8),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSet {
    /// Columns are points.
    pub points: DMatrix<f64>,
    pub w_mean: DVector<f64>,
    pub w_cov: DVector<f64>,
    pub rule: RuleTag,
    pub generating_mean: DVector<f64>,
    pub generating_cov: DMatrix<f64>,
    /// Number of unpaired leading points.
    pub centers: usize,
}

impl SigmaSet {
    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    /// Weighted raw moment `Σ w_i Π_k x_ik^e_k`, summed pair by pair.
    ///
    /// For sets centred at the origin every odd moment comes out exactly zero.
    pub fn raw_moment(&self, exponents: &[u32]) -> f64 {
        let eval = |j: usize| -> f64 {
            exponents
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(k, &e)| self.points[(k, j)].powi(e as i32))
                .product()
        };
        let mut total = 0.0;
        for j in 0..self.centers {
            total += self.w_mean[j] * eval(j);
        }
        let mut j = self.centers;
        while j + 1 < self.len() {
            total += self.w_mean[j] * eval(j) + self.w_mean[j + 1] * eval(j + 1);
            j += 2;
        }
        total
    }

    /// Weighted central moment about the generating mean, summed pair by pair.
    pub fn central_moment(&self, exponents: &[u32]) -> f64 {
        let eval = |j: usize| -> f64 {
            exponents
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(k, &e)| (self.points[(k, j)] - self.generating_mean[k]).powi(e as i32))
                .product()
        };
        let mut total = 0.0;
        for j in 0..self.centers {
            total += self.w_cov[j] * eval(j);
        }
        let mut j = self.centers;
        while j + 1 < self.len() {
            total += self.w_cov[j] * eval(j) + self.w_cov[j + 1] * eval(j + 1);
            j += 2;
        }
        total
    }
}

/// Worst raw-moment deviations of a set from `N(0, I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    /// Largest `|Σ w x^e − E[ξ^e]|` over monomials of even total degree.
    pub max_even_error: f64,
    /// Largest `|Σ w x^e|` over monomials of odd total degree.
    pub max_odd_abs: f64,
    pub monomials: usize,
}

/// Compare every mixed raw moment of total degree `1..=degree`.
pub fn check_gaussian_moments(set: &SigmaSet, degree: usize) -> MomentCheck {
    let n = set.dim();
    let mut check = MomentCheck {
        max_even_error: 0.0,
        max_odd_abs: 0.0,
        monomials: 0,
    };
    let mut exps = vec![0u32; n];
    visit_exponents(&mut exps, 0, degree as u32, &mut |e| {
        if e.iter().all(|&v| v == 0) {
            return;
        }
        check.monomials += 1;
        let m = set.raw_moment(e);
        if e.iter().sum::<u32>() % 2 == 0 {
            check.max_even_error = check.max_even_error.max((m - gaussian_raw_moment(e)).abs());
        } else {
            check.max_odd_abs = check.max_odd_abs.max(m.abs());
        }
    });
    check
}

fn visit_exponents(exps: &mut [u32], k: usize, budget: u32, f: &mut impl FnMut(&[u32])) {
    if k == exps.len() {
        f(exps);
        return;
    }
    for e in 0..=budget {
        exps[k] = e;
        visit_exponents(exps, k + 1, budget - e, f);
    }
    exps[k] = 0;
}

/// `Σ w_mean,i · column_i`.
pub fn weighted_mean(set: &SigmaSet, transformed: &DMatrix<f64>) -> Result<DVector<f64>> {
    if transformed.ncols() != set.len() {
        return Err(Error::DimensionMismatch(format!(
            "weighted_mean: {} columns for {} sigma points",
            transformed.ncols(),
            set.len()
        )));
    }
    Ok(transformed * &set.w_mean)
}

/// `Σ w_cov,i · a_i b_iᵀ` for already centred columns.
pub fn weighted_cov(
    set: &SigmaSet,
    centered_a: &DMatrix<f64>,
    centered_b: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    weighted_outer(&set.w_cov, centered_a, centered_b)
}

pub(crate) fn weighted_outer(
    weights: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if a.ncols() != weights.len() || b.ncols() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "weighted_cov: {} and {} columns for {} weights",
            a.ncols(),
            b.ncols(),
            weights.len()
        )));
    }
    let mut scaled = a.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= weights[j];
    }
    Ok(scaled * b.transpose())
}

/// Affine transport `x = mean + C ξ` of a canonical (zero-mean, identity) set.
pub fn scale_points(
    canonical: &SigmaSet,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> Result<SigmaSet> {
    scale_points_with(canonical, mean, cov, &JitterPolicy::default())
}

pub fn scale_points_with(
    canonical: &SigmaSet,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    policy: &JitterPolicy,
) -> Result<SigmaSet> {
    let n = canonical.dim();
    if mean.len() != n || cov.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "scale_points: rule dimension {n}, mean {}, cov {:?}",
            mean.len(),
            cov.shape()
        )));
    }
    let c = spd_factor_with(cov, policy)?;
    let mut points = &c * &canonical.points;
    for mut col in points.column_iter_mut() {
        col += mean;
    }
    Ok(SigmaSet {
        points,
        w_mean: canonical.w_mean.clone(),
        w_cov: canonical.w_cov.clone(),
        rule: canonical.rule,
        generating_mean: mean.clone(),
        generating_cov: cov.clone(),
        centers: canonical.centers,
    })
}

/// Stack a state with zero-mean noise blocks: mean `[x; 0; …]`, block-diagonal covariance.
pub fn augment(
    state_mean: &DVector<f64>,
    state_cov: &DMatrix<f64>,
    noise_covs: &[&DMatrix<f64>],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let nx = state_mean.len();
    if state_cov.shape() != (nx, nx) {
        return Err(Error::DimensionMismatch(format!(
            "augment: state mean {nx}, covariance {:?}",
            state_cov.shape()
        )));
    }
    for q in noise_covs {
        if !q.is_square() {
            return Err(Error::DimensionMismatch("augment: non-square noise block".into()));
        }
    }
    let na = nx + noise_covs.iter().map(|q| q.nrows()).sum::<usize>();
    let mut mean = DVector::zeros(na);
    mean.rows_mut(0, nx).copy_from(state_mean);
    let mut cov = DMatrix::zeros(na, na);
    cov.view_mut((0, 0), (nx, nx)).copy_from(state_cov);
    let mut off = nx;
    for q in noise_covs {
        let k = q.nrows();
        cov.view_mut((off, off), (k, k)).copy_from(*q);
        off += k;
    }
    Ok((mean, cov))
}
