//! Circular restricted three-body problem (Earth–Moon, rotating barycentric frame).

use nalgebra::{DMatrix, DVector, Vector6};
use serde::{Deserialize, Serialize};

use super::integrator::{integrate, IntegratorSettings};
use crate::error::{Error, Result};
use crate::filter::{DynamicsModel, MeasurementModel};

pub const EARTH_MOON_MU: f64 = 1.215058560962404e-2;
/// Period of the L1 northern halo orbit used as the reference trajectory, TU.
pub const HALO_PERIOD: f64 = 2.1783120807931518;
pub const HALO_X0: [f64; 6] = [
    0.87592140310093525,
    -1.59031517986629e-26,
    0.19175810982939320,
    -2.93025310878967e-14,
    0.23080031482213192,
    7.3649704261223776e-14,
];

const MIN_PRIMARY_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cr3bpParams {
    pub mass_ratio: f64,
    pub period: f64,
}

impl Default for Cr3bpParams {
    fn default() -> Self {
        Self {
            mass_ratio: EARTH_MOON_MU,
            period: HALO_PERIOD,
        }
    }
}

pub fn cr3bp_deriv(s: &Vector6<f64>, mu: f64) -> Result<Vector6<f64>> {
    let (x, y, z) = (s[0], s[1], s[2]);
    let r1 = ((x + mu).powi(2) + y * y + z * z).sqrt();
    let r2 = ((x - 1.0 + mu).powi(2) + y * y + z * z).sqrt();
    if r1 < MIN_PRIMARY_DISTANCE || r2 < MIN_PRIMARY_DISTANCE {
        return Err(Error::SingularPotential(r1.min(r2)));
    }
    let (r13, r23) = (r1.powi(3), r2.powi(3));
    let ux = x - (1.0 - mu) * (x + mu) / r13 - mu * (x - 1.0 + mu) / r23;
    let uy = y - (1.0 - mu) * y / r13 - mu * y / r23;
    let uz = -(1.0 - mu) * z / r13 - mu * z / r23;
    Ok(Vector6::new(
        s[3],
        s[4],
        s[5],
        2.0 * s[4] + ux,
        -2.0 * s[3] + uy,
        uz,
    ))
}

/// `v²/2 − (x²+y²)/2 − (1−μ)/r₁ − μ/r₂`, conserved by the flow.
pub fn cr3bp_energy(s: &Vector6<f64>, mu: f64) -> f64 {
    let (x, y, z) = (s[0], s[1], s[2]);
    let r1 = ((x + mu).powi(2) + y * y + z * z).sqrt();
    let r2 = ((x - 1.0 + mu).powi(2) + y * y + z * z).sqrt();
    let v2 = s[3] * s[3] + s[4] * s[4] + s[5] * s[5];
    0.5 * v2 - 0.5 * (x * x + y * y) - (1.0 - mu) / r1 - mu / r2
}

pub fn cr3bp_propagate(
    s: &Vector6<f64>,
    mu: f64,
    dt: f64,
    settings: &IntegratorSettings,
) -> Result<Vector6<f64>> {
    if dt >= 0.0 {
        integrate(|_, y| cr3bp_deriv(y, mu), s, 0.0, dt, settings)
    } else {
        // integrate the time-reversed system forward
        integrate(|_, y| cr3bp_deriv(y, mu).map(|d| -d), s, 0.0, -dt, settings)
    }
}

/// Flow over one sampling interval plus additive velocity noise.
#[derive(Debug, Clone)]
pub struct Cr3bpDynamics {
    pub params: Cr3bpParams,
    pub settings: IntegratorSettings,
}

impl DynamicsModel for Cr3bpDynamics {
    fn state_dim(&self) -> usize {
        6
    }

    fn noise_dim(&self) -> usize {
        3
    }

    fn propagate(&self, x: &DVector<f64>, noise: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
        let s = Vector6::from_column_slice(x.as_slice());
        let next = cr3bp_propagate(&s, self.params.mass_ratio, dt, &self.settings)
            .map_err(|e| Error::PredictFailure(e.to_string()))?;
        let mut out = DVector::from_column_slice(next.as_slice());
        for k in 0..3 {
            out[3 + k] += noise[k];
        }
        Ok(out)
    }

    fn noise_input(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(6, 3);
        g.view_mut((3, 0), (3, 3)).fill_with_identity();
        g
    }
}

/// `(ρ, ρ̇) = (‖r‖, rᵀv/‖r‖)`.
pub fn range_rangerate(state: &DVector<f64>) -> Result<DVector<f64>> {
    let r = state.rows(0, 3);
    let v = state.rows(3, 3);
    let rho = r.norm();
    if rho == 0.0 {
        return Err(Error::DegenerateGeometry("range at the origin".into()));
    }
    Ok(DVector::from_vec(vec![rho, r.dot(&v) / rho]))
}

#[derive(Debug, Clone, Default)]
pub struct RangeRate;

impl MeasurementModel for RangeRate {
    fn meas_dim(&self) -> usize {
        2
    }

    fn measure(&self, x: &DVector<f64>, noise: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(range_rangerate(x)? + noise)
    }
}
