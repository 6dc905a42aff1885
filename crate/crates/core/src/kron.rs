//! Kronecker-power vectors, stack operators and symmetric-monomial bookkeeping.
//!
//! Slot layout follows the lexicographic multi-index order produced by
//! repeated `⊗`: for `v ⊗ v` with `v` of length `m`, slot `i * m + j` holds
//! `v[i] * v[j]`. Every module that touches `δy^[J]` uses this layout.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KronVector {
    pub data: DVector<f64>,
    pub base_dim: usize,
    pub order: usize,
}

impl KronVector {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value at multi-index `(i_1, ..., i_J)`.
    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[flat_index(index, self.base_dim)]
    }
}

fn flat_index(index: &[usize], base: usize) -> usize {
    index.iter().fold(0, |acc, &i| acc * base + i)
}

/// `v ⊗ v ⊗ … ⊗ v` (`order` factors).
pub fn kron_power(v: &DVector<f64>, order: usize) -> Result<KronVector> {
    if order == 0 {
        return Err(Error::DegenerateBasis);
    }
    let m = v.len();
    let mut data = v.clone();
    for _ in 1..order {
        data = kron_vec(&data, v);
    }
    Ok(KronVector {
        data,
        base_dim: m,
        order,
    })
}

/// Kronecker product of two vectors, `a ⊗ b`.
pub fn kron_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let nb = b.len();
    DVector::from_fn(a.len() * nb, |k, _| a[k / nb] * b[k % nb])
}

/// Column-major stack operator.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn mat(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "mat: vector of length {} cannot fill {rows}x{cols}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Mapping from the `m^J` Kronecker slots onto the distinct symmetric monomials.
#[derive(Debug, Clone, PartialEq)]
pub struct DedupMap {
    pub base_dim: usize,
    pub order: usize,
    pub unique_count: usize,
    /// Unique-monomial id for every Kronecker slot.
    pub forward: Vec<usize>,
    /// Number of Kronecker slots collapsing onto each unique monomial.
    pub multiplicity: Vec<usize>,
    /// First Kronecker slot of each unique monomial.
    pub representative: Vec<usize>,
}

pub fn dedup_map(m: usize, order: usize) -> Result<DedupMap> {
    if m == 0 {
        return Err(Error::InvalidParams("dedup_map: base dimension must be >= 1".into()));
    }
    if order == 0 {
        return Err(Error::DegenerateBasis);
    }
    let total = m.pow(order as u32);
    let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut forward = Vec::with_capacity(total);
    let mut multiplicity = Vec::new();
    let mut representative = Vec::new();
    let mut index = vec![0usize; order];
    for slot in 0..total {
        let mut rem = slot;
        for k in (0..order).rev() {
            index[k] = rem % m;
            rem /= m;
        }
        let mut key = index.clone();
        key.sort_unstable();
        let next = ids.len();
        let id = *ids.entry(key).or_insert(next);
        if id == multiplicity.len() {
            multiplicity.push(0);
            representative.push(slot);
        }
        multiplicity[id] += 1;
        forward.push(id);
    }
    Ok(DedupMap {
        base_dim: m,
        order,
        unique_count: multiplicity.len(),
        forward,
        multiplicity,
        representative,
    })
}

impl DedupMap {
    /// Keep one representative slot per unique monomial.
    pub fn compress(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.unique_count,
            self.representative.iter().map(|&s| full[s]),
        )
    }

    /// Inverse of [`compress`](Self::compress) for symmetric-tensor-valued vectors.
    pub fn expand(&self, unique: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.forward.len(), self.forward.iter().map(|&u| unique[u]))
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Tolerances for [`spd_factor_with`], relative to `trace(P) / n`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JitterPolicy {
    /// Most negative eigenvalue still accepted as round-off.
    pub psd_rel: f64,
    /// Largest diagonal jitter tried before giving up.
    pub max_jitter_rel: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            psd_rel: 1e-12,
            max_jitter_rel: 1e-8,
        }
    }
}

pub fn symmetrize(p: &DMatrix<f64>) -> DMatrix<f64> {
    (p + p.transpose()) * 0.5
}

pub fn spd_factor(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_factor_with(p, &JitterPolicy::default())
}

/// Lower-triangular `C` with `C Cᵀ ≈ P`.
///
/// Rows and columns that are exactly zero (e.g. a zero noise block of an
/// augmented covariance) are carried through as zero rows of the factor.
pub fn spd_factor_with(p: &DMatrix<f64>, policy: &JitterPolicy) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    if p.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "spd_factor: {}x{} is not square",
            n,
            p.ncols()
        )));
    }
    let sym = symmetrize(p);
    let active: Vec<usize> = (0..n)
        .filter(|&i| (0..n).any(|j| sym[(i, j)] != 0.0))
        .collect();
    let mut factor = DMatrix::zeros(n, n);
    if active.is_empty() {
        return Ok(factor);
    }
    let k = active.len();
    let sub = DMatrix::from_fn(k, k, |i, j| sym[(active[i], active[j])]);
    let scale = sub.trace() / k as f64;
    let sub_factor = cholesky_with_jitter(&sub, scale, policy)?;
    for (i, &ri) in active.iter().enumerate() {
        for (j, &cj) in active.iter().enumerate() {
            factor[(ri, cj)] = sub_factor[(i, j)];
        }
    }
    Ok(factor)
}

fn cholesky_with_jitter(
    p: &DMatrix<f64>,
    scale: f64,
    policy: &JitterPolicy,
) -> Result<DMatrix<f64>> {
    if let Some(ch) = p.clone().cholesky() {
        return Ok(ch.l());
    }
    let tol = policy.psd_rel * scale.abs();
    let min_eig = SymmetricEigen::new(p.clone()).eigenvalues.min();
    if !(min_eig >= -tol) || !(scale > 0.0) {
        return Err(Error::IndefiniteMatrix {
            min_eigenvalue: min_eig,
            tolerance: tol,
        });
    }
    let max_jitter = policy.max_jitter_rel * scale;
    let mut jitter = tol.max(f64::MIN_POSITIVE);
    while jitter <= max_jitter {
        let mut shifted = p.clone();
        for i in 0..p.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(ch) = shifted.cholesky() {
            return Ok(ch.l());
        }
        jitter *= 2.0;
    }
    Err(Error::IndefiniteMatrix {
        min_eigenvalue: min_eig,
        tolerance: tol,
    })
}

/// Smallest eigenvalue of the symmetric part of `p`.
pub fn min_eigenvalue(p: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(p)).eigenvalues.min()
}
