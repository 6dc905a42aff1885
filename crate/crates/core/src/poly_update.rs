//! Order-N polynomial MMSE measurement update.
//!
//! The estimator is `x̂⁺ = x̂⁻ + K ψ(δy)` with the stacked, centred monomial
//! vector `ψ = [δy; δy^[2] − c₂; …; δy^[N] − c_N]` and `K = P_xψ P_ψψ⁻¹`.
//! Kronecker powers repeat symmetric monomials, so the gain is solved on the
//! deduplicated basis and spread back over the duplicate slots.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kron::{dedup_map, kron_power, spd_factor_with, symmetrize, vec, DedupMap, JitterPolicy};
use crate::moments::{compound_measurement_moments, NoiseMoments};
use crate::sigma::weighted_outer;

const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    pub meas_dim: usize,
    pub order: usize,
    /// `c_J` for `J = 1..=N`; `c_1` is always zero.
    pub centering: Vec<DVector<f64>>,
    pub dedup: Vec<DedupMap>,
}

impl MonomialBasis {
    pub fn new(meas_dim: usize, order: usize, centering: Vec<DVector<f64>>) -> Result<Self> {
        if order == 0 {
            return Err(Error::UnsupportedOrder(0));
        }
        if centering.len() != order {
            return Err(Error::DimensionMismatch(format!(
                "basis of order {order} needs {order} centering vectors, got {}",
                centering.len()
            )));
        }
        for (j, c) in centering.iter().enumerate() {
            if c.len() != meas_dim.pow(j as u32 + 1) {
                return Err(Error::DimensionMismatch(format!(
                    "centering c_{} has length {}, expected {}",
                    j + 1,
                    c.len(),
                    meas_dim.pow(j as u32 + 1)
                )));
            }
        }
        if centering[0].iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidParams("c_1 must be zero".into()));
        }
        let dedup = (1..=order)
            .map(|j| dedup_map(meas_dim, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            meas_dim,
            order,
            centering,
            dedup,
        })
    }

    /// Width `Σ_J m^J` of the Kronecker-stacked basis.
    pub fn full_width(&self) -> usize {
        (1..=self.order).map(|j| self.meas_dim.pow(j as u32)).sum()
    }

    /// Width `Σ_J C(m+J−1, J)` of the deduplicated basis.
    pub fn unique_width(&self) -> usize {
        self.dedup.iter().map(|d| d.unique_count).sum()
    }

    /// Offsets of each order block in the full basis.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        (1..=self.order)
            .map(|j| {
                let o = off;
                off += self.meas_dim.pow(j as u32);
                o
            })
            .collect()
    }

    /// Full-basis slot kept for each deduplicated coordinate.
    fn representatives(&self) -> Vec<usize> {
        let offsets = self.block_offsets();
        self.dedup
            .iter()
            .zip(offsets)
            .flat_map(|(d, o)| d.representative.iter().map(move |&s| o + s))
            .collect()
    }

    /// `ψ` restricted to the deduplicated coordinates.
    pub fn psi_unique(&self, delta_y: &DVector<f64>) -> Result<DVector<f64>> {
        let full = build_psi(delta_y, self)?;
        let reps = self.representatives();
        Ok(DVector::from_iterator(reps.len(), reps.iter().map(|&s| full[s])))
    }
}

/// Stacked centred monomials `[δy; δy^[2] − c₂; …; δy^[N] − c_N]`.
pub fn build_psi(delta_y: &DVector<f64>, basis: &MonomialBasis) -> Result<DVector<f64>> {
    if delta_y.len() != basis.meas_dim {
        return Err(Error::DimensionMismatch(format!(
            "build_psi: innovation length {}, basis dimension {}",
            delta_y.len(),
            basis.meas_dim
        )));
    }
    let mut out = DVector::zeros(basis.full_width());
    let mut off = 0;
    for j in 1..=basis.order {
        let power = kron_power(delta_y, j)?.data - &basis.centering[j - 1];
        out.rows_mut(off, power.len()).copy_from(&power);
        off += power.len();
    }
    Ok(out)
}

/// Weighted deviations of a transformed point set.
#[derive(Debug, Clone)]
pub struct MomentSource {
    /// Covariance weights, one per point.
    pub weights: DVector<f64>,
    /// State deviations `X_i − x̂`, one column per point.
    pub dx: DMatrix<f64>,
    /// Measurement deviations `Y_i − ŷ`, one column per point.
    pub dy: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum NoiseHandling<'a> {
    /// Measurement noise already flows through the point set.
    Included,
    /// Independent additive noise with known moments (orders 1 and 2 only).
    Additive(&'a NoiseMoments),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMoments {
    /// `[P_xy | P_xy² | … | P_xy^N]`, `n_x × D`.
    pub pxy: DMatrix<f64>,
    /// Covariance of `ψ`, `D × D`.
    pub pyy: DMatrix<f64>,
    /// `pxy` on the deduplicated basis, `n_x × D_u`.
    pub pxy_unique: DMatrix<f64>,
    /// `pyy` on the deduplicated basis, `D_u × D_u`.
    pub pyy_unique: DMatrix<f64>,
}

/// Centering vectors and the state/basis covariance blocks from a point set.
pub fn assemble(
    source: &MomentSource,
    order: usize,
    noise: NoiseHandling<'_>,
) -> Result<(MonomialBasis, AugmentedMoments)> {
    let p = source.weights.len();
    let m = source.dy.nrows();
    if source.dx.ncols() != p || source.dy.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "assemble: {p} weights, {} state and {} measurement columns",
            source.dx.ncols(),
            source.dy.ncols()
        )));
    }
    if order == 0 {
        return Err(Error::UnsupportedOrder(0));
    }
    if let NoiseHandling::Additive(nm) = noise {
        if order > 2 {
            return Err(Error::AdditiveOrderUnsupported(order));
        }
        if nm.dim != m {
            return Err(Error::DimensionMismatch(format!(
                "assemble: noise dimension {}, measurement dimension {m}",
                nm.dim
            )));
        }
    }

    let width: usize = (1..=order).map(|j| m.pow(j as u32)).sum();
    let mut stacked = DMatrix::zeros(width, p);
    for i in 0..p {
        let dy = source.dy.column(i).into_owned();
        let mut off = 0;
        for j in 1..=order {
            let power = kron_power(&dy, j)?.data;
            stacked.view_mut((off, i), (power.len(), 1)).copy_from(&power);
            off += power.len();
        }
    }
    let mut raw = weighted_outer(&source.weights, &stacked, &stacked)?;
    let pxy = weighted_outer(&source.weights, &source.dx, &stacked)?;

    if let NoiseHandling::Additive(nm) = noise {
        let m2 = m * m;
        let pyy_bar = raw.view((0, 0), (m, m)).into_owned();
        if order == 1 {
            raw.view_mut((0, 0), (m, m)).copy_from(&(&pyy_bar + &nm.cov));
        } else {
            let pyy2_bar = raw.view((0, m), (m, m2)).into_owned();
            let py2y2_bar = raw.view((m, m), (m2, m2)).into_owned();
            let (pyy, pyy2, py2y2) =
                compound_measurement_moments(&pyy_bar, &pyy2_bar, &py2y2_bar, nm)?;
            raw.view_mut((0, 0), (m, m)).copy_from(&pyy);
            raw.view_mut((0, m), (m, m2)).copy_from(&pyy2);
            raw.view_mut((m, 0), (m2, m)).copy_from(&pyy2.transpose());
            raw.view_mut((m, m), (m2, m2)).copy_from(&py2y2);
        }
    }

    let mut centering = vec![DVector::zeros(m)];
    let mut off = m;
    for j in 2..=order {
        let len = m.pow(j as u32);
        let c = if j == 2 {
            // the second raw moment of δy is the (noise-compounded) covariance
            vec(&raw.view((0, 0), (m, m)).into_owned())
        } else {
            stacked.rows(off, len) * &source.weights
        };
        centering.push(c);
        off += len;
    }
    let basis = MonomialBasis::new(m, order, centering)?;

    let mut c_all = DVector::zeros(width);
    let mut off = 0;
    for c in &basis.centering {
        c_all.rows_mut(off, c.len()).copy_from(c);
        off += c.len();
    }
    let pyy = symmetrize(&(raw - &c_all * c_all.transpose()));

    let reps = basis.representatives();
    let pxy_unique = pxy.select_columns(&reps);
    let pyy_unique = pyy.select_rows(&reps).select_columns(&reps);
    Ok((
        basis,
        AugmentedMoments {
            pxy,
            pyy,
            pxy_unique,
            pyy_unique,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainBlocks {
    pub order: usize,
    /// Gain on the deduplicated basis, `n_x × D_u`.
    pub unique: DMatrix<f64>,
    /// Gain on the full Kronecker basis, `n_x × D`, duplicates split evenly.
    pub full: DMatrix<f64>,
    pub solved_in_dedup: bool,
    /// Whether the truncated spectral fallback was needed.
    pub regularized: bool,
    /// Block widths in the full basis.
    widths: Vec<usize>,
}

impl GainBlocks {
    /// Columns of the full gain multiplying `δy^[J] − c_J`.
    pub fn block(&self, j: usize) -> DMatrix<f64> {
        let off: usize = self.widths[..j - 1].iter().sum();
        self.full.columns(off, self.widths[j - 1]).into_owned()
    }
}

/// `K = P_xψ P_ψψ⁻¹`, solved on the equilibrated deduplicated system.
pub fn solve_gain(am: &AugmentedMoments, basis: &MonomialBasis) -> Result<GainBlocks> {
    let du = am.pyy_unique.nrows();
    if du != basis.unique_width() || am.pxy_unique.ncols() != du {
        return Err(Error::DimensionMismatch(format!(
            "solve_gain: basis width {}, moments width {du}",
            basis.unique_width()
        )));
    }
    let diag = am.pyy_unique.diagonal();
    if diag.iter().any(|d| !d.is_finite()) {
        return Err(Error::SingularSystem("basis covariance has a non-finite diagonal entry".into()));
    }
    // coordinates with zero variance carry no information and get zero gain;
    // a negative diagonal only arises from a rule that misses higher moments
    let active: Vec<usize> = (0..du).filter(|&i| diag[i] != 0.0).collect();
    let da = active.len();
    let scale = DVector::from_iterator(da, active.iter().map(|&i| 1.0 / diag[i].abs().sqrt()));
    let a = DMatrix::from_fn(da, da, |i, j| am.pyy_unique[(active[i], active[j])] * scale[i] * scale[j]);
    let b = DMatrix::from_fn(am.pxy_unique.nrows(), da, |i, j| am.pxy_unique[(i, active[j])] * scale[j]);

    let mut unique = DMatrix::zeros(am.pxy_unique.nrows(), du);
    let mut regularized = da < du;
    if da > 0 {
        let eig = a.clone().symmetric_eigen();
        let (lo, hi) = (eig.eigenvalues.abs().min(), eig.eigenvalues.abs().max());
        // K A = B  ⇔  A Kᵀ = Bᵀ
        let bt = b.transpose();
        let kt = if !(lo > 0.0) || hi / lo > CONDITION_LIMIT {
            // directions below the cutoff are unobservable in the basis and get no gain
            regularized = true;
            log::debug!("gain solve regularized (eigenvalues {lo:e}..{hi:e})");
            let cutoff = hi / CONDITION_LIMIT;
            let inv = eig.eigenvalues.map(|l| if l.abs() > cutoff { 1.0 / l } else { 0.0 });
            &eig.eigenvectors * DMatrix::from_diagonal(&inv) * (eig.eigenvectors.transpose() * &bt)
        } else {
            match a.clone().cholesky() {
                Some(ch) => ch.solve(&bt),
                None => a
                    .clone()
                    .lu()
                    .solve(&bt)
                    .ok_or_else(|| Error::SingularSystem(format!("eigenvalues {lo:e}..{hi:e}")))?,
            }
        };
        for (j, &i) in active.iter().enumerate() {
            unique.set_column(i, &(kt.row(j).transpose() * scale[j]));
        }
    }
    if unique.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite gain".into()));
    }

    let widths: Vec<usize> = basis.dedup.iter().map(|d| d.forward.len()).collect();
    let mut full = DMatrix::zeros(unique.nrows(), basis.full_width());
    let (mut uoff, mut foff) = (0, 0);
    for d in &basis.dedup {
        for (slot, &id) in d.forward.iter().enumerate() {
            let col = unique.column(uoff + id) / d.multiplicity[id] as f64;
            full.set_column(foff + slot, &col);
        }
        uoff += d.unique_count;
        foff += d.forward.len();
    }
    Ok(GainBlocks {
        order: basis.order,
        unique,
        full,
        solved_in_dedup: true,
        regularized,
        widths,
    })
}

/// Posterior from a measured and predicted measurement.
pub fn update(
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
    gain: &GainBlocks,
    am: &AugmentedMoments,
    basis: &MonomialBasis,
    measured_y: &DVector<f64>,
    predicted_y: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    update_with_innovation(
        prior_mean,
        prior_cov,
        gain,
        am,
        basis,
        &(measured_y - predicted_y),
        &JitterPolicy::default(),
    )
}

/// Posterior from an already formed innovation `δy` (e.g. with angle wrapping).
pub fn update_with_innovation(
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
    gain: &GainBlocks,
    am: &AugmentedMoments,
    basis: &MonomialBasis,
    innovation: &DVector<f64>,
    policy: &JitterPolicy,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = prior_mean.len();
    if prior_cov.shape() != (n, n) || gain.unique.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "update: state {n}, covariance {:?}, gain rows {}",
            prior_cov.shape(),
            gain.unique.nrows()
        )));
    }
    let psi = basis.psi_unique(innovation)?;
    let mean = prior_mean + &gain.unique * psi;
    let cov = symmetrize(&(prior_cov - &gain.unique * &am.pyy_unique * gain.unique.transpose()));
    spd_factor_with(&cov, policy)?;
    Ok((mean, cov))
}

/// A frozen order-N estimator `x̂⁻ + K ψ(δy)`, reusable across many measurements.
#[derive(Debug, Clone)]
pub struct PolyEstimator {
    pub prior_mean: DVector<f64>,
    pub predicted_y: DVector<f64>,
    pub basis: MonomialBasis,
    pub gain: GainBlocks,
}

impl PolyEstimator {
    pub fn estimate(&self, measured_y: &DVector<f64>) -> Result<DVector<f64>> {
        let psi = self.basis.psi_unique(&(measured_y - &self.predicted_y))?;
        Ok(&self.prior_mean + &self.gain.unique * psi)
    }
}
