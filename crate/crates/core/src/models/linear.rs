//! Linear models `x' = F x + G μ`, `y = H x + η`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filter::{DynamicsModel, MeasurementModel};

#[derive(Debug, Clone)]
pub struct LinearDynamics {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl DynamicsModel for LinearDynamics {
    fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    fn noise_dim(&self) -> usize {
        self.g.ncols()
    }

    fn propagate(&self, x: &DVector<f64>, noise: &DVector<f64>, _dt: f64) -> Result<DVector<f64>> {
        if x.len() != self.f.ncols() || noise.len() != self.g.ncols() {
            return Err(Error::DimensionMismatch("linear dynamics input".into()));
        }
        Ok(&self.f * x + &self.g * noise)
    }

    fn noise_input(&self) -> DMatrix<f64> {
        self.g.clone()
    }
}

#[derive(Debug, Clone)]
pub struct LinearMeasurement {
    pub h: DMatrix<f64>,
}

impl MeasurementModel for LinearMeasurement {
    fn meas_dim(&self) -> usize {
        self.h.nrows()
    }

    fn measure(&self, x: &DVector<f64>, noise: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.h.ncols() || noise.len() != self.h.nrows() {
            return Err(Error::DimensionMismatch("linear measurement input".into()));
        }
        Ok(&self.h * x + noise)
    }
}

/// Any closure `y = h(x) + η`.
pub struct FnMeasurement<F> {
    pub dim: usize,
    pub h: F,
}

impl<F> MeasurementModel for FnMeasurement<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    fn meas_dim(&self) -> usize {
        self.dim
    }

    fn measure(&self, x: &DVector<f64>, noise: &DVector<f64>) -> Result<DVector<f64>> {
        Ok((self.h)(x) + noise)
    }
}

/// Any closure `x' = f(x) + G μ`.
pub struct FnDynamics<F> {
    pub g: DMatrix<f64>,
    pub f: F,
}

impl<F> DynamicsModel for FnDynamics<F>
where
    F: Fn(&DVector<f64>, f64) -> DVector<f64> + Sync,
{
    fn state_dim(&self) -> usize {
        self.g.nrows()
    }

    fn noise_dim(&self) -> usize {
        self.g.ncols()
    }

    fn propagate(&self, x: &DVector<f64>, noise: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
        Ok((self.f)(x, dt) + &self.g * noise)
    }

    fn noise_input(&self) -> DMatrix<f64> {
        self.g.clone()
    }
}
