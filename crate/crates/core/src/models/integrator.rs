//! Dormand–Prince 5(4) with PI step-size control.

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on a step as a fraction of the requested interval.
    pub max_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_step_fraction: 1.0,
            max_steps: 1_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const PI_ALPHA: f64 = 0.7 / 5.0;
const PI_BETA: f64 = 0.4 / 5.0;

/// Integrate `ẏ = f(t, y)` from `t0` to `t1`.
pub fn integrate<const D: usize, F>(
    mut f: F,
    y0: &SVector<f64, D>,
    t0: f64,
    t1: f64,
    settings: &IntegratorSettings,
) -> Result<SVector<f64, D>>
where
    F: FnMut(f64, &SVector<f64, D>) -> Result<SVector<f64, D>>,
{
    if !(t1 >= t0) {
        return Err(Error::InvalidParams(format!("integrate: t1 = {t1} before t0 = {t0}")));
    }
    if !(settings.rel_tol > 0.0 && settings.abs_tol > 0.0) {
        return Err(Error::InvalidParams("integrate: tolerances must be positive".into()));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(*y0);
    }
    let h_max = settings.max_step_fraction * span;
    let mut t = t0;
    let mut y = *y0;
    let mut k1 = f(t, &y)?;
    let mut h = initial_step(&k1, &y, settings).min(h_max);
    let mut err_prev: f64 = 1e-4;
    for _ in 0..settings.max_steps {
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let k2 = f(t + C2 * h, &(y + h * A21 * k1))?;
        let k3 = f(t + C3 * h, &(y + h * (A31 * k1 + A32 * k2)))?;
        let k4 = f(t + C4 * h, &(y + h * (A41 * k1 + A42 * k2 + A43 * k3)))?;
        let k5 = f(t + C5 * h, &(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)))?;
        let k6 = f(
            t + h,
            &(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)),
        )?;
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(t + h, &y_new)?;
        let err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let mut sum = 0.0;
        for i in 0..D {
            let sc = settings.abs_tol + settings.rel_tol * y[i].abs().max(y_new[i].abs());
            sum += (err_vec[i] / sc).powi(2);
        }
        let err = (sum / D as f64).sqrt();
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y = y_new;
            k1 = k7;
            if last {
                return Ok(y);
            }
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-PI_ALPHA) * err_prev.powf(PI_BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            err_prev = err.max(1e-4);
            h = (h * factor).min(h_max);
        } else {
            h *= (SAFETY * err.powf(-0.2)).max(MIN_FACTOR);
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(span) {
            return Err(Error::StepUnderflow { t, h });
        }
    }
    Err(Error::StepUnderflow { t, h })
}

fn initial_step<const D: usize>(
    f0: &SVector<f64, D>,
    y0: &SVector<f64, D>,
    s: &IntegratorSettings,
) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..D {
        let sc = s.abs_tol + s.rel_tol * y0[i].abs();
        d0 += (y0[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / D as f64).sqrt(), (d1 / D as f64).sqrt());
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
}
