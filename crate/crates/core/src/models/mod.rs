//! Truth and filter models for the scalar, CW and CR3BP experiments.

pub mod cr3bp;
pub mod cw;
pub mod integrator;
pub mod linear;
pub mod scalar;

pub use cr3bp::{EARTH_MOON_MU, HALO_PERIOD, HALO_X0, cr3bp_deriv, cr3bp_energy, cr3bp_propagate, range_rangerate, Cr3bpDynamics, Cr3bpParams, RangeRate};
pub use cw::{EARTH_MU, cw_angles, cw_stm, wrap_angle, CwAngles, CwDynamics, CwParams};
pub use integrator::{integrate, IntegratorSettings};
pub use linear::{FnDynamics, FnMeasurement, LinearDynamics, LinearMeasurement};
pub use scalar::{scalar_arctan_model, ScalarArctan};
