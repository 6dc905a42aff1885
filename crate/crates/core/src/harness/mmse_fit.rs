//! Empirical polynomial MMSE baselines fitted directly to particles.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::poly_update::MonomialBasis;

const RANK_TOL: f64 = 1e-12;
const SPREAD_TOL: f64 = 1e-12;

/// `x̂ = B · [1; ψ_N(z)]` with `z = (y − ȳ) / s_y`, fitted by least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct MmseFit {
    pub order: usize,
    pub y_mean: DVector<f64>,
    /// Per-component standardisation; zero for components without spread.
    pub y_inv_scale: DVector<f64>,
    basis: MonomialBasis,
    /// `n_x × (1 + unique basis width)`.
    pub coefficients: DMatrix<f64>,
    /// In-sample `√(mean ‖x − x̂‖²)`.
    pub rmse: f64,
    pub regularized: bool,
}

impl MmseFit {
    fn features(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        features(&self.basis, &(y - &self.y_mean).component_mul(&self.y_inv_scale))
    }

    pub fn predict(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.coefficients * self.features(y)?)
    }
}

fn features(basis: &MonomialBasis, dy: &DVector<f64>) -> Result<DVector<f64>> {
    let psi = basis.psi_unique(dy)?;
    let mut f = DVector::zeros(psi.len() + 1);
    f[0] = 1.0;
    f.rows_mut(1, psi.len()).copy_from(&psi);
    Ok(f)
}

/// Least-squares projection of `x` onto `{1, ψ_N(δy)}`. Columns of `xs` and
/// `ys` are paired samples.
pub fn fit_polynomial_mmse(xs: &DMatrix<f64>, ys: &DMatrix<f64>, order: usize) -> Result<MmseFit> {
    let s = xs.ncols();
    if s == 0 {
        return Err(Error::EmptyInput);
    }
    if ys.ncols() != s {
        return Err(Error::DimensionMismatch(format!("{s} states, {} measurements", ys.ncols())));
    }
    let m = ys.nrows();
    let centering = (1..=order).map(|j| DVector::zeros(m.pow(j as u32))).collect();
    let basis = MonomialBasis::new(m, order, centering)?;
    let width = basis.unique_width() + 1;
    if s <= width {
        return Err(Error::InvalidParams(format!("{s} samples for a basis of width {width}")));
    }
    let y_mean = ys.column_mean();
    let y_inv_scale = DVector::from_fn(m, |k, _| {
        let sd = (ys.row(k).iter().map(|v| (v - y_mean[k]).powi(2)).sum::<f64>() / s as f64).sqrt();
        if sd > SPREAD_TOL * y_mean[k].abs().max(f64::MIN_POSITIVE) { 1.0 / sd } else { 0.0 }
    });
    let mut a = DMatrix::zeros(s, width);
    for i in 0..s {
        let z = (ys.column(i) - &y_mean).component_mul(&y_inv_scale);
        a.row_mut(i).copy_from(&features(&basis, &z)?.transpose());
    }
    let b = xs.transpose();
    let qr = a.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    let regularized = r.diagonal().iter().any(|d| d.abs() <= RANK_TOL * diag_max);
    let sol = if regularized {
        warn!("polynomial MMSE fit of order {order}: design matrix is rank deficient, using SVD");
        a.clone()
            .svd(true, true)
            .solve(&b, RANK_TOL * diag_max)
            .map_err(|e| Error::SingularSystem(e.to_string()))?
    } else {
        let qtb = qr.q().transpose() * &b;
        r.solve_upper_triangular(&qtb)
            .ok_or_else(|| Error::SingularSystem("triangular solve".into()))?
    };
    let coefficients = sol.transpose();
    let resid = &a * &sol - &b;
    let rmse = (resid.norm_squared() / s as f64).sqrt();
    Ok(MmseFit {
        order,
        y_mean,
        y_inv_scale,
        basis,
        coefficients,
        rmse,
        regularized,
    })
}
