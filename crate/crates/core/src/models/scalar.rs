use nalgebra::DVector;

use crate::error::Result;
use crate::filter::MeasurementModel;

pub fn scalar_arctan_model(x: f64) -> f64 {
    x.atan()
}

/// `y = arctan(x) + η`.
#[derive(Debug, Clone, Default)]
pub struct ScalarArctan;

impl MeasurementModel for ScalarArctan {
    fn meas_dim(&self) -> usize {
        1
    }

    fn measure(&self, x: &DVector<f64>, noise: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_element(1, scalar_arctan_model(x[0]) + noise[0]))
    }
}
