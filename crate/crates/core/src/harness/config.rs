//! Scenario files (TOML).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::filter::{DynamicsModel, FilterConfig, MeasurementModel, SigmaRule};
use crate::models::{
    Cr3bpDynamics, Cr3bpParams, CwAngles, CwDynamics, CwParams, IntegratorSettings, RangeRate,
    ScalarArctan,
};
use crate::moments::{discrete_moments, gaussian_moments, iid_product_support, NoiseMoments};
use crate::sigma::UtParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    ScalarArctan,
    CwRelnav,
    Cr3bpHalo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    ScalarArctan,
    Cw {
        semi_major_axis_km: f64,
        grav_param_km3_s2: f64,
    },
    Cr3bp {
        mass_ratio: f64,
        period_tu: f64,
        rel_tol: f64,
        abs_tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    /// Number of measurement updates. Zero-length predictions are skipped
    /// when `dt` is zero (single-update experiments).
    pub steps: usize,
    /// Sampling interval in `time_unit`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Sampling interval as a fraction of the orbit period (CR3BP only).
    #[serde(default)]
    pub period_fraction: Option<f64>,
    pub time_unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    None { dim: usize },
    Gaussian { cov_diag: Vec<f64> },
    /// Independent components drawn from one discrete distribution;
    /// `weights` are normalised to probabilities.
    DiscreteIid {
        dim: usize,
        values: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl NoiseSpec {
    pub fn dim(&self) -> usize {
        match self {
            NoiseSpec::None { dim } | NoiseSpec::DiscreteIid { dim, .. } => *dim,
            NoiseSpec::Gaussian { cov_diag } => cov_diag.len(),
        }
    }

    pub fn moments(&self) -> Result<NoiseMoments> {
        match self {
            NoiseSpec::None { dim } => Ok(NoiseMoments::zero(*dim)),
            NoiseSpec::Gaussian { cov_diag } => {
                gaussian_moments(&DMatrix::from_diagonal(&DVector::from_column_slice(cov_diag)))
            }
            NoiseSpec::DiscreteIid { dim, .. } => {
                let (support, probs) = self.support()?;
                let _ = dim;
                discrete_moments(&support, &probs)
            }
        }
    }

    /// Joint support of a discrete spec.
    pub fn support(&self) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
        match self {
            NoiseSpec::DiscreteIid { dim, values, weights } => {
                if values.len() != weights.len() || values.is_empty() {
                    return Err(Error::Config("discrete noise: values/weights length".into()));
                }
                let total: f64 = weights.iter().sum();
                if weights.iter().any(|&w| w < 0.0) || !(total > 0.0) {
                    return Err(Error::InvalidProbs("weights must be nonnegative with positive sum".into()));
                }
                let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
                iid_product_support(values, &probs, *dim)
            }
            _ => Err(Error::Config("noise spec has no discrete support".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub mean: Vec<f64>,
    pub cov_diag: Vec<f64>,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: ScenarioName,
    pub mc_runs: usize,
    pub base_seed: u64,
    pub filters: Vec<String>,
    #[serde(default)]
    pub ut: Option<UtParams>,
    #[serde(default)]
    pub reuse_sigma_points: bool,
    /// Runs whose position error exceeds this multiple of the initial σ are flagged.
    #[serde(default = "default_divergence_factor")]
    pub divergence_factor: f64,
    #[serde(default)]
    pub include_diverged_in_sigma: bool,
    pub model: ModelSpec,
    pub initial: InitialSpec,
    pub schedule: Schedule,
    pub process_noise: NoiseSpec,
    pub measurement_noise: NoiseSpec,
}

fn default_divergence_factor() -> f64 {
    1e3
}

/// A named contiguous block of state components (e.g. position).
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: &'static str,
    pub start: usize,
    pub len: usize,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_runs < 1 {
            return Err(Error::Config("mc_runs must be >= 1".into()));
        }
        if self.filters.is_empty() {
            return Err(Error::Config("no filters listed".into()));
        }
        self.filter_configs()?;
        let n = self.state_dim();
        if self.initial.mean.len() != n || self.initial.cov_diag.len() != n {
            return Err(Error::Config(format!(
                "initial mean/cov must have {n} entries"
            )));
        }
        if self.initial.cov_diag.iter().any(|&v| v < 0.0) {
            return Err(Error::Config("initial variances must be nonnegative".into()));
        }
        if self.schedule.steps == 0 {
            return Err(Error::Config("schedule.steps must be >= 1".into()));
        }
        let dt = self.dt()?;
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("invalid sampling interval {dt}")));
        }
        if self.measurement_noise.dim() != self.meas_dim() {
            return Err(Error::Config(format!(
                "measurement noise must have dimension {}",
                self.meas_dim()
            )));
        }
        if self.process_noise.dim() != self.process_dim() {
            return Err(Error::Config(format!(
                "process noise must have dimension {}",
                self.process_dim()
            )));
        }
        self.process_noise.moments()?;
        self.measurement_noise.moments()?;
        if !(self.divergence_factor > 0.0) {
            return Err(Error::Config("divergence_factor must be > 0".into()));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        match self.model {
            ModelSpec::ScalarArctan => 1,
            _ => 6,
        }
    }

    pub fn meas_dim(&self) -> usize {
        match self.model {
            ModelSpec::ScalarArctan => 1,
            _ => 2,
        }
    }

    pub fn process_dim(&self) -> usize {
        match self.model {
            ModelSpec::ScalarArctan => 1,
            _ => 3,
        }
    }

    pub fn groups(&self) -> Vec<Group> {
        match self.model {
            ModelSpec::ScalarArctan => vec![Group { name: "x", start: 0, len: 1 }],
            _ => vec![
                Group { name: "pos", start: 0, len: 3 },
                Group { name: "vel", start: 3, len: 3 },
            ],
        }
    }

    pub fn dt(&self) -> Result<f64> {
        match (&self.model, self.schedule.dt, self.schedule.period_fraction) {
            (_, Some(dt), None) => Ok(dt),
            (ModelSpec::Cr3bp { period_tu, .. }, None, Some(f)) => Ok(period_tu * f),
            (ModelSpec::ScalarArctan, None, None) => Ok(0.0),
            _ => Err(Error::Config(
                "schedule needs exactly one of dt / period_fraction (the latter for cr3bp only)".into(),
            )),
        }
    }

    pub fn filter_configs(&self) -> Result<Vec<FilterConfig>> {
        self.filters
            .iter()
            .map(|name| {
                let mut cfg: FilterConfig = name.parse()?;
                if let (SigmaRule::Ut(_), Some(ut)) = (cfg.sigma_rule, self.ut) {
                    cfg.sigma_rule = SigmaRule::Ut(ut);
                }
                cfg.reuse_sigma_points = self.reuse_sigma_points;
                Ok(cfg)
            })
            .collect()
    }

    pub fn dynamics(&self) -> Option<Box<dyn DynamicsModel>> {
        match &self.model {
            ModelSpec::ScalarArctan => None,
            ModelSpec::Cw { semi_major_axis_km, grav_param_km3_s2 } => Some(Box::new(CwDynamics::new(&CwParams {
                semi_major_axis: *semi_major_axis_km,
                grav_param: *grav_param_km3_s2,
            }))),
            ModelSpec::Cr3bp { mass_ratio, period_tu, rel_tol, abs_tol } => Some(Box::new(Cr3bpDynamics {
                params: Cr3bpParams {
                    mass_ratio: *mass_ratio,
                    period: *period_tu,
                },
                settings: IntegratorSettings {
                    rel_tol: *rel_tol,
                    abs_tol: *abs_tol,
                    ..IntegratorSettings::default()
                },
            })),
        }
    }

    pub fn measurement(&self) -> Box<dyn MeasurementModel> {
        match self.model {
            ModelSpec::ScalarArctan => Box::new(ScalarArctan),
            ModelSpec::Cw { .. } => Box::new(CwAngles),
            ModelSpec::Cr3bp { .. } => Box::new(RangeRate),
        }
    }

    /// SHA-256 of the canonical JSON form of the parsed scenario.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
