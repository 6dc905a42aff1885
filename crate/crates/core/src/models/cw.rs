//! Clohessy–Wiltshire relative motion with azimuth/elevation angles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{DynamicsModel, MeasurementModel};

/// Earth gravitational parameter, km³/s².
pub const EARTH_MU: f64 = 398600.4418;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwParams {
    /// Chief semi-major axis, km.
    pub semi_major_axis: f64,
    /// km³/s².
    pub grav_param: f64,
}

impl Default for CwParams {
    fn default() -> Self {
        Self {
            semi_major_axis: 7000.0,
            grav_param: EARTH_MU,
        }
    }
}

impl CwParams {
    /// Mean motion, rad/s.
    pub fn mean_motion(&self) -> f64 {
        (self.grav_param / self.semi_major_axis.powi(3)).sqrt()
    }
}

/// Closed-form transition matrix of the CW equations (x radial, y along-track).
pub fn cw_stm(alpha: f64, dt: f64) -> Matrix6<f64> {
    let (s, c) = (alpha * dt).sin_cos();
    let nt = alpha * dt;
    let n = alpha;
    #[rustfmt::skip]
    let phi = Matrix6::new(
        4.0 - 3.0 * c,          0.0, 0.0,  s / n,                2.0 * (1.0 - c) / n,   0.0,
        6.0 * (s - nt),         1.0, 0.0, -2.0 * (1.0 - c) / n,  (4.0 * s - 3.0 * nt) / n, 0.0,
        0.0,                    0.0, c,    0.0,                  0.0,                   s / n,
        3.0 * n * s,            0.0, 0.0,  c,                    2.0 * s,               0.0,
        -6.0 * n * (1.0 - c),   0.0, 0.0, -2.0 * s,              4.0 * c - 3.0,         0.0,
        0.0,                    0.0, -n * s, 0.0,                0.0,                   c,
    );
    phi
}

/// The CW right-hand side, for checking the closed form against integration.
pub fn cw_deriv(alpha: f64, x: &nalgebra::Vector6<f64>) -> nalgebra::Vector6<f64> {
    nalgebra::Vector6::new(
        x[3],
        x[4],
        x[5],
        2.0 * alpha * x[4] + 3.0 * alpha * alpha * x[0],
        -2.0 * alpha * x[3],
        -alpha * alpha * x[2],
    )
}

/// `(azimuth, elevation)` of the relative position.
pub fn cw_angles(state: &DVector<f64>) -> Result<DVector<f64>> {
    let (x, y, z) = (state[0], state[1], state[2]);
    let r = (x * x + y * y + z * z).sqrt();
    if x == 0.0 && y == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "azimuth undefined on the z axis (r = {r})"
        )));
    }
    Ok(DVector::from_vec(vec![y.atan2(x), (z / r).asin()]))
}

/// Wrap an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Linear CW dynamics with optional process noise on the velocity.
#[derive(Debug, Clone)]
pub struct CwDynamics {
    pub alpha: f64,
}

impl CwDynamics {
    pub fn new(params: &CwParams) -> Self {
        Self {
            alpha: params.mean_motion(),
        }
    }
}

impl DynamicsModel for CwDynamics {
    fn state_dim(&self) -> usize {
        6
    }

    fn noise_dim(&self) -> usize {
        3
    }

    fn propagate(&self, x: &DVector<f64>, noise: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
        let phi = cw_stm(self.alpha, dt);
        let mut next = DVector::from_column_slice((phi * nalgebra::Vector6::from_column_slice(x.as_slice())).as_slice());
        for k in 0..3 {
            next[3 + k] += noise[k];
        }
        Ok(next)
    }

    fn noise_input(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(6, 3);
        g.view_mut((3, 0), (3, 3)).fill_with_identity();
        g
    }
}

#[derive(Debug, Clone, Default)]
pub struct CwAngles;

impl MeasurementModel for CwAngles {
    fn meas_dim(&self) -> usize {
        2
    }

    fn measure(&self, x: &DVector<f64>, noise: &DVector<f64>) -> Result<DVector<f64>> {
        let mut y = cw_angles(x)?;
        y[0] = wrap_angle(y[0] + noise[0]);
        y[1] += noise[1];
        Ok(y)
    }

    fn residual(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut d = a - b;
        d[0] = wrap_angle(d[0]);
        d
    }
}
