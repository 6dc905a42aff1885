//! Central moments up to fourth order and the additive-noise compounding rules.
//!
//! Layouts: skewness is the `n × n²` matrix `E[δ (δ⊗δ)ᵀ]`, kurtosis the
//! `n² × n²` matrix `E[(δ⊗δ)(δ⊗δ)ᵀ]`, both in the slot order of [`crate::kron`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kron::{kron_vec, symmetrize, vec};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMoments {
    pub dim: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub skew: DMatrix<f64>,
    pub kurt: DMatrix<f64>,
}

impl NoiseMoments {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            mean: DVector::zeros(dim),
            cov: DMatrix::zeros(dim, dim),
            skew: DMatrix::zeros(dim, dim * dim),
            kurt: DMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// Second-moment matrix of the stacked vector `[δ; δ⊗δ − vec(cov)]`.
    pub fn stacked_second_moment(&self) -> DMatrix<f64> {
        let n = self.dim;
        let n2 = n * n;
        let vc = vec(&self.cov);
        let mut out = DMatrix::zeros(n + n2, n + n2);
        out.view_mut((0, 0), (n, n)).copy_from(&self.cov);
        out.view_mut((0, n), (n, n2)).copy_from(&self.skew);
        out.view_mut((n, 0), (n2, n)).copy_from(&self.skew.transpose());
        out.view_mut((n, n), (n2, n2))
            .copy_from(&(&self.kurt - &vc * vc.transpose()));
        out
    }
}

fn check_symmetric(p: &DMatrix<f64>) -> Result<()> {
    if !p.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let asym = (p - p.transpose()).amax();
    if asym > SYMMETRY_TOL * p.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Moments of `N(0, cov)`: zero skewness, Isserlis fourth moments.
pub fn gaussian_moments(cov: &DMatrix<f64>) -> Result<NoiseMoments> {
    check_symmetric(cov)?;
    let p = symmetrize(cov);
    let n = p.nrows();
    let mut kurt = DMatrix::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    kurt[(a * n + b, c * n + d)] =
                        p[(a, b)] * p[(c, d)] + p[(a, c)] * p[(b, d)] + p[(a, d)] * p[(b, c)];
                }
            }
        }
    }
    Ok(NoiseMoments {
        dim: n,
        mean: DVector::zeros(n),
        cov: p,
        skew: DMatrix::zeros(n, n * n),
        kurt,
    })
}

fn check_probs(probs: &[f64], count: usize) -> Result<()> {
    if probs.len() != count || count == 0 {
        return Err(Error::InvalidProbs(format!(
            "{} probabilities for {} support points",
            probs.len(),
            count
        )));
    }
    if probs.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::InvalidProbs("negative or NaN probability".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidProbs(format!("probabilities sum to {total}")));
    }
    Ok(())
}

/// Exact moments of a zero-mean discrete distribution.
pub fn discrete_moments(values: &[DVector<f64>], probs: &[f64]) -> Result<NoiseMoments> {
    check_probs(probs, values.len())?;
    let n = values[0].len();
    if values.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch(
            "discrete support points have different lengths".into(),
        ));
    }
    let mean = values
        .iter()
        .zip(probs)
        .fold(DVector::zeros(n), |acc, (v, &p)| acc + v * p);
    if mean.amax() > 1e-15 {
        return Err(Error::NonZeroMean(mean.amax()));
    }
    let mut out = NoiseMoments::zero(n);
    for (v, &p) in values.iter().zip(probs) {
        let v2 = kron_vec(v, v);
        out.cov += v * v.transpose() * p;
        out.skew += v * v2.transpose() * p;
        out.kurt += &v2 * v2.transpose() * p;
    }
    out.cov = symmetrize(&out.cov);
    out.kurt = symmetrize(&out.kurt);
    Ok(out)
}

/// Support and probabilities of a vector whose components are independent
/// draws from the same scalar distribution.
pub fn iid_product_support(
    values: &[f64],
    probs: &[f64],
    dim: usize,
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    check_probs(probs, values.len())?;
    let k = values.len();
    let total = k.pow(dim as u32);
    let mut support = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut v = DVector::zeros(dim);
        let mut p = 1.0;
        for c in (0..dim).rev() {
            let j = rem % k;
            rem /= k;
            v[c] = values[j];
            p *= probs[j];
        }
        support.push(v);
        weights.push(p);
    }
    Ok((support, weights))
}

/// `E[(a⊗e)(e⊗a)ᵀ]` for independent zero-mean `a` (covariance `pa`) and `e`
/// (covariance `pe`): entry `((i,j),(k,l)) = pa[i,l] · pe[j,k]`.
fn commuted_kron(pa: &DMatrix<f64>, pe: &DMatrix<f64>) -> DMatrix<f64> {
    let m = pa.nrows();
    DMatrix::from_fn(m * m, m * m, |r, c| {
        let (i, j) = (r / m, r % m);
        let (k, l) = (c / m, c % m);
        pa[(i, l)] * pe[(j, k)]
    })
}

/// Moments of `y = ȳ + η` from the noiseless moments of `ȳ` and the moments
/// of independent additive noise `η`.
///
/// Returns `(P_yy, P_yy², P_y²y²)`.
pub fn compound_measurement_moments(
    pyy_bar: &DMatrix<f64>,
    pyy2_bar: &DMatrix<f64>,
    py2y2_bar: &DMatrix<f64>,
    noise: &NoiseMoments,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let m = pyy_bar.nrows();
    let m2 = m * m;
    if noise.dim != m
        || pyy_bar.ncols() != m
        || pyy2_bar.shape() != (m, m2)
        || py2y2_bar.shape() != (m2, m2)
    {
        return Err(Error::DimensionMismatch(format!(
            "compound_measurement_moments: measurement dim {m}, noise dim {}, Pyy2 {:?}, Py2y2 {:?}",
            noise.dim,
            pyy2_bar.shape(),
            py2y2_bar.shape()
        )));
    }
    let pe = &noise.cov;
    let pyy = pyy_bar + pe;
    let pyy2 = pyy2_bar + &noise.skew;
    let vbar = vec(pyy_bar);
    let ve = vec(pe);
    let py2y2 = py2y2_bar
        + &noise.kurt
        + pyy_bar.kronecker(pe)
        + commuted_kron(pyy_bar, pe)
        + pe.kronecker(pyy_bar)
        + commuted_kron(pe, pyy_bar)
        + &vbar * ve.transpose()
        + &ve * vbar.transpose();
    Ok((symmetrize(&pyy), pyy2, symmetrize(&py2y2)))
}

/// One draw from a discrete distribution by inverse-CDF lookup.
pub fn sample_discrete<R: Rng + ?Sized>(
    values: &[DVector<f64>],
    probs: &[f64],
    rng: &mut R,
) -> DVector<f64> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (v, &p) in values.iter().zip(probs) {
        acc += p;
        if u < acc {
            return v.clone();
        }
    }
    values[values.len() - 1].clone()
}
