//! Predict/update cycles for the polynomial sigma-point filter family.
//!
//! Names follow `[order][A][method]KF[-c]`: order is empty (1), `Q` (2),
//! `C` (3) or `P{N}`; `A` marks the augmented noise mode; method is `U` for
//! the unscented set or `CU` for a CUT set, with `-c` giving the CUT order.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kron::{symmetrize, JitterPolicy};
use crate::moments::NoiseMoments;
use crate::poly_update::{
    assemble, solve_gain, update_with_innovation, MomentSource, NoiseHandling, PolyEstimator,
};
use crate::sigma::{augment, cut_points, scale_points_with, ut_points_with, SigmaSet, UtParams};

pub trait DynamicsModel: Sync {
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    /// `x_{k+1} = f(x_k, μ_k)` over `dt`.
    fn propagate(&self, x: &DVector<f64>, noise: &DVector<f64>, dt: f64) -> Result<DVector<f64>>;
    /// Input matrix `G` of the additive form `f(x) + G μ`.
    fn noise_input(&self) -> DMatrix<f64>;
}

pub trait MeasurementModel: Sync {
    fn meas_dim(&self) -> usize;
    fn noise_dim(&self) -> usize {
        self.meas_dim()
    }
    /// `y = h(x, η)`.
    fn measure(&self, x: &DVector<f64>, noise: &DVector<f64>) -> Result<DVector<f64>>;
    /// `a − b`, with any wrapping the measurement needs.
    fn residual(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        a - b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub epoch: f64,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, epoch: f64) -> Result<Self> {
        if cov.shape() != (mean.len(), mean.len()) {
            return Err(Error::DimensionMismatch(format!(
                "state mean {}, covariance {:?}",
                mean.len(),
                cov.shape()
            )));
        }
        Ok(Self { mean, cov, epoch })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaRule {
    Ut(UtParams),
    Cut(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Additive,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub update_order: usize,
    pub sigma_rule: SigmaRule,
    pub noise_mode: NoiseMode,
    pub jitter: JitterPolicy,
    /// Reuse the propagated points for the update instead of regenerating
    /// them from the predicted Gaussian.
    pub reuse_sigma_points: bool,
}

impl FilterConfig {
    pub fn new(update_order: usize, sigma_rule: SigmaRule, noise_mode: NoiseMode) -> Result<Self> {
        let cfg = Self {
            update_order,
            sigma_rule,
            noise_mode,
            jitter: JitterPolicy::default(),
            reuse_sigma_points: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.update_order == 0 {
            return Err(Error::UnsupportedOrder(0));
        }
        if self.noise_mode == NoiseMode::Additive && self.update_order > 2 {
            return Err(Error::AdditiveOrderUnsupported(self.update_order));
        }
        if let SigmaRule::Cut(c) = self.sigma_rule {
            if ![4, 6, 8].contains(&c) {
                return Err(Error::UnsupportedOrder(c));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        let order = match self.update_order {
            1 => String::new(),
            2 => "Q".into(),
            3 => "C".into(),
            n => format!("P{n}"),
        };
        let aug = if self.noise_mode == NoiseMode::Augmented { "A" } else { "" };
        match self.sigma_rule {
            SigmaRule::Ut(_) => format!("{order}{aug}UKF"),
            SigmaRule::Cut(c) => format!("{order}{aug}CUKF-{c}"),
        }
    }
}

impl fmt::Display for FilterConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FilterConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unrecognised filter name {s:?}"));
        let upper = s.trim().to_ascii_uppercase();
        let (head, rule) = match upper.split_once('-') {
            Some((head, c)) => {
                let c: usize = c.parse().map_err(|_| bad())?;
                let head = head.strip_suffix("CUKF").ok_or_else(bad)?;
                (head, SigmaRule::Cut(c))
            }
            None => (
                upper.strip_suffix("UKF").ok_or_else(bad)?,
                SigmaRule::Ut(UtParams::default()),
            ),
        };
        let (head, mode) = match head.strip_suffix('A') {
            Some(h) => (h, NoiseMode::Augmented),
            None => (head, NoiseMode::Additive),
        };
        let order = match head {
            "" => 1,
            "Q" => 2,
            "C" => 3,
            p => p
                .strip_prefix('P')
                .and_then(|n| n.parse().ok())
                .filter(|&n| n >= 1)
                .ok_or_else(bad)?,
        };
        FilterConfig::new(order, rule, mode)
    }
}

fn point_set(rule: &SigmaRule, mean: &DVector<f64>, cov: &DMatrix<f64>, policy: &JitterPolicy) -> Result<SigmaSet> {
    match rule {
        SigmaRule::Ut(p) => ut_points_with(mean, cov, p, policy),
        SigmaRule::Cut(c) => scale_points_with(&cut_points(mean.len(), *c)?, mean, cov, policy),
    }
}

fn as_predict_failure(e: Error) -> Error {
    match e {
        Error::PredictFailure(_) => e,
        other => Error::PredictFailure(other.to_string()),
    }
}

/// Points of a predicted set kept for reuse by the update.
#[derive(Debug, Clone)]
pub struct PropagatedPoints {
    pub states: DMatrix<f64>,
    /// Measurement-noise components per point (augmented mode only).
    pub meas_noise: Option<DMatrix<f64>>,
    pub w_mean: DVector<f64>,
    pub w_cov: DVector<f64>,
}

fn propagate_set(
    set: &SigmaSet,
    nx: usize,
    nq: usize,
    model: &dyn DynamicsModel,
    dt: f64,
) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(nx, set.len());
    let zero = DVector::zeros(model.noise_dim());
    for i in 0..set.len() {
        let col = set.points.column(i);
        let x = col.rows(0, nx).into_owned();
        let mu = if nq > 0 { col.rows(nx, nq).into_owned() } else { zero.clone() };
        let next = model.propagate(&x, &mu, dt).map_err(as_predict_failure)?;
        out.set_column(i, &next);
    }
    Ok(out)
}

fn moments_of(points: &DMatrix<f64>, w_mean: &DVector<f64>, w_cov: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    // deviations are formed about the first point so coincident points give an exactly zero covariance
    let origin = points.column(0).into_owned();
    let mut dev = points.clone();
    for mut c in dev.column_iter_mut() {
        c -= &origin;
    }
    let shift = &dev * w_mean;
    let mean = origin + &shift;
    for mut c in dev.column_iter_mut() {
        c -= &shift;
    }
    let cov = crate::sigma::weighted_outer(w_cov, &dev, &dev).expect("consistent shapes");
    (mean, symmetrize(&cov))
}

fn predict_points(
    state: &GaussianState,
    model: &dyn DynamicsModel,
    process: &NoiseMoments,
    meas_noise: Option<&NoiseMoments>,
    cfg: &FilterConfig,
    dt: f64,
) -> Result<(GaussianState, PropagatedPoints)> {
    cfg.validate()?;
    let nx = state.mean.len();
    let nq = model.noise_dim();
    if process.dim != nq {
        return Err(Error::DimensionMismatch(format!(
            "process noise dimension {}, model expects {nq}",
            process.dim
        )));
    }
    let (set, noise_dim) = match cfg.noise_mode {
        NoiseMode::Additive => (point_set(&cfg.sigma_rule, &state.mean, &state.cov, &cfg.jitter)?, 0),
        NoiseMode::Augmented => {
            let mut blocks = vec![&process.cov];
            if let Some(r) = meas_noise {
                blocks.push(&r.cov);
            }
            let (m, p) = augment(&state.mean, &state.cov, &blocks)?;
            (point_set(&cfg.sigma_rule, &m, &p, &cfg.jitter)?, nq)
        }
    };
    let states = propagate_set(&set, nx, noise_dim, model, dt)?;
    let (mean, mut cov) = moments_of(&states, &set.w_mean, &set.w_cov);
    if cfg.noise_mode == NoiseMode::Additive {
        let g = model.noise_input();
        cov += &g * &process.cov * g.transpose();
        cov = symmetrize(&cov);
    }
    let meas_block = match (cfg.noise_mode, meas_noise) {
        (NoiseMode::Augmented, Some(r)) => Some(set.points.rows(nx + nq, r.dim).into_owned()),
        _ => None,
    };
    Ok((
        GaussianState {
            mean,
            cov,
            epoch: state.epoch + dt,
        },
        PropagatedPoints {
            states,
            meas_noise: meas_block,
            w_mean: set.w_mean.clone(),
            w_cov: set.w_cov.clone(),
        },
    ))
}

/// Time update.
pub fn predict(
    state: &GaussianState,
    model: &dyn DynamicsModel,
    process: &NoiseMoments,
    cfg: &FilterConfig,
    dt: f64,
) -> Result<GaussianState> {
    Ok(predict_points(state, model, process, None, cfg, dt)?.0)
}

/// Gain and basis for a prior, evaluated on the given points.
fn estimator_from_points(
    prior: &GaussianState,
    states: &DMatrix<f64>,
    noise: Option<&DMatrix<f64>>,
    w_mean: &DVector<f64>,
    w_cov: &DVector<f64>,
    model: &dyn MeasurementModel,
    meas_noise: &NoiseMoments,
    cfg: &FilterConfig,
) -> Result<(PolyEstimator, crate::poly_update::AugmentedMoments)> {
    let m = model.meas_dim();
    let p = states.ncols();
    let zero = DVector::zeros(model.noise_dim());
    let mut y = DMatrix::zeros(m, p);
    for i in 0..p {
        let x = states.column(i).into_owned();
        let eta = noise.map(|n| n.column(i).into_owned()).unwrap_or_else(|| zero.clone());
        y.set_column(i, &model.measure(&x, &eta)?);
    }
    // mean formed from residuals about the first point so wrapped components average correctly
    let y0 = y.column(0).into_owned();
    let mut y_hat = y0.clone();
    for i in 0..p {
        y_hat += model.residual(&y.column(i).into_owned(), &y0) * w_mean[i];
    }
    let mut dy = DMatrix::zeros(m, p);
    let mut dx = states.clone();
    for i in 0..p {
        dy.set_column(i, &model.residual(&y.column(i).into_owned(), &y_hat));
        dx.column_mut(i).axpy(-1.0, &prior.mean, 1.0);
    }
    let source = MomentSource {
        weights: w_cov.clone(),
        dx,
        dy,
    };
    let handling = if noise.is_some() {
        NoiseHandling::Included
    } else {
        NoiseHandling::Additive(meas_noise)
    };
    let (basis, am) = assemble(&source, cfg.update_order, handling)?;
    let gain = solve_gain(&am, &basis)?;
    Ok((
        PolyEstimator {
            prior_mean: prior.mean.clone(),
            predicted_y: y_hat,
            basis,
            gain,
        },
        am,
    ))
}

/// The frozen update map `ỹ ↦ x̂⁺` for a prior, together with its moments.
pub fn build_estimator(
    prior: &GaussianState,
    model: &dyn MeasurementModel,
    meas_noise: &NoiseMoments,
    cfg: &FilterConfig,
) -> Result<(PolyEstimator, crate::poly_update::AugmentedMoments)> {
    cfg.validate()?;
    if meas_noise.dim != model.noise_dim() {
        return Err(Error::DimensionMismatch(format!(
            "measurement noise dimension {}, model expects {}",
            meas_noise.dim,
            model.noise_dim()
        )));
    }
    let nx = prior.mean.len();
    match cfg.noise_mode {
        NoiseMode::Additive => {
            let set = point_set(&cfg.sigma_rule, &prior.mean, &prior.cov, &cfg.jitter)?;
            estimator_from_points(prior, &set.points, None, &set.w_mean, &set.w_cov, model, meas_noise, cfg)
        }
        NoiseMode::Augmented => {
            let (m, p) = augment(&prior.mean, &prior.cov, &[&meas_noise.cov])?;
            let set = point_set(&cfg.sigma_rule, &m, &p, &cfg.jitter)?;
            let states = set.points.rows(0, nx).into_owned();
            let noise = set.points.rows(nx, meas_noise.dim).into_owned();
            estimator_from_points(prior, &states, Some(&noise), &set.w_mean, &set.w_cov, model, meas_noise, cfg)
        }
    }
}

fn apply(
    prior: &GaussianState,
    est: &PolyEstimator,
    am: &crate::poly_update::AugmentedMoments,
    model: &dyn MeasurementModel,
    cfg: &FilterConfig,
    measured_y: &DVector<f64>,
) -> Result<GaussianState> {
    let innovation = model.residual(measured_y, &est.predicted_y);
    let (mean, cov) = update_with_innovation(
        &prior.mean,
        &prior.cov,
        &est.gain,
        am,
        &est.basis,
        &innovation,
        &cfg.jitter,
    )?;
    Ok(GaussianState {
        mean,
        cov,
        epoch: prior.epoch,
    })
}

/// Measurement update from points regenerated on the prior.
pub fn do_update(
    prior: &GaussianState,
    model: &dyn MeasurementModel,
    meas_noise: &NoiseMoments,
    cfg: &FilterConfig,
    measured_y: &DVector<f64>,
) -> Result<GaussianState> {
    let (est, am) = build_estimator(prior, model, meas_noise, cfg)?;
    apply(prior, &est, &am, model, cfg, measured_y)
}

/// Predict, then update when a measurement is present.
#[allow(clippy::too_many_arguments)]
pub fn step(
    state: &GaussianState,
    dynamics: &dyn DynamicsModel,
    measurement: &dyn MeasurementModel,
    process: &NoiseMoments,
    meas_noise: &NoiseMoments,
    cfg: &FilterConfig,
    dt: f64,
    measured_y: Option<&DVector<f64>>,
) -> Result<GaussianState> {
    if !cfg.reuse_sigma_points {
        let prior = predict(state, dynamics, process, cfg, dt)?;
        return match measured_y {
            Some(y) => do_update(&prior, measurement, meas_noise, cfg, y),
            None => Ok(prior),
        };
    }
    let carry = (cfg.noise_mode == NoiseMode::Augmented).then_some(meas_noise);
    let (prior, pts) = predict_points(state, dynamics, process, carry, cfg, dt)?;
    let Some(y) = measured_y else {
        return Ok(prior);
    };
    let (est, am) = estimator_from_points(
        &prior,
        &pts.states,
        pts.meas_noise.as_ref(),
        &pts.w_mean,
        &pts.w_cov,
        measurement,
        meas_noise,
        cfg,
    )?;
    apply(&prior, &est, &am, measurement, cfg, y)
}
