//! Monte Carlo campaigns: truth simulation and paired filter runs.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::filter::{do_update, step, DynamicsModel, FilterConfig, GaussianState, MeasurementModel};
use crate::harness::config::{Group, NoiseSpec, Scenario};
use crate::moments::{sample_discrete, NoiseMoments};

/// Campaign output. Per-run arrays are laid out `[run][step][component]`
/// and steps count measurement updates from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub config_hash: String,
    pub base_seed: u64,
    pub runs: usize,
    pub steps: usize,
    pub state_dim: usize,
    pub meas_dim: usize,
    pub groups: Vec<Group>,
    /// Standard deviation of the initial error in each group.
    pub initial_sigma: Vec<f64>,
    pub truth: Vec<f64>,
    pub measurements: Vec<f64>,
    /// SHA-256 of each run's measurement sequence.
    pub stream_digests: Vec<String>,
    pub filters: Vec<FilterRuns>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRuns {
    pub name: String,
    /// `x̂ − x_true`; NaN after a filter failure.
    pub errors: Vec<f64>,
    /// Trace of each group's block of the posterior covariance, `[run][step][group]`.
    pub est_var: Vec<f64>,
    pub diverged: Vec<bool>,
    /// Step and message of the first failure in each run, if any.
    pub failures: Vec<Option<(usize, String)>>,
}

impl McResult {
    pub fn error(&self, filter: usize, run: usize, step: usize) -> &[f64] {
        let n = self.state_dim;
        let at = (run * self.steps + step - 1) * n;
        &self.filters[filter].errors[at..at + n]
    }

    pub fn est_var(&self, filter: usize, run: usize, step: usize) -> &[f64] {
        let g = self.groups.len();
        let at = (run * self.steps + step - 1) * g;
        &self.filters[filter].est_var[at..at + g]
    }

    pub fn truth_at(&self, run: usize, step: usize) -> &[f64] {
        let n = self.state_dim;
        let at = (run * self.steps + step - 1) * n;
        &self.truth[at..at + n]
    }

    pub fn measurement_at(&self, run: usize, step: usize) -> &[f64] {
        let m = self.meas_dim;
        let at = (run * self.steps + step - 1) * m;
        &self.measurements[at..at + m]
    }

    pub fn filter_index(&self, name: &str) -> Option<usize> {
        self.filters.iter().position(|f| f.name == name)
    }

    pub fn diverged_count(&self, filter: usize) -> usize {
        self.filters[filter].diverged.iter().filter(|&&d| d).count()
    }
}

/// One run's truth and measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRun {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
}

impl TruthRun {
    pub fn digest(&self) -> String {
        digest_stream(&self.measurements)
    }
}

fn digest_stream(ys: &[DVector<f64>]) -> String {
    let mut h = Sha256::new();
    for y in ys {
        for v in y.iter() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Per-run generator: stream `run` of the ChaCha20 keyed by `base_seed`.
pub fn run_rng(base_seed: u64, run: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(base_seed);
    rng.set_stream(run as u64);
    rng
}

/// Draw sampler compiled from a [`NoiseSpec`].
#[derive(Debug, Clone)]
pub enum NoiseSampler {
    Zero(usize),
    Gaussian(DVector<f64>),
    Discrete(Vec<f64>, Vec<f64>, usize),
}

impl NoiseSampler {
    pub fn new(spec: &NoiseSpec) -> Result<Self> {
        match spec {
            NoiseSpec::None { dim } => Ok(NoiseSampler::Zero(*dim)),
            NoiseSpec::Gaussian { cov_diag } => {
                if cov_diag.iter().any(|&v| v < 0.0) {
                    return Err(Error::Config("negative noise variance".into()));
                }
                Ok(NoiseSampler::Gaussian(DVector::from_iterator(
                    cov_diag.len(),
                    cov_diag.iter().map(|v| v.sqrt()),
                )))
            }
            NoiseSpec::DiscreteIid { dim, values, weights } => {
                let total: f64 = weights.iter().sum();
                if values.len() != weights.len() || !(total > 0.0) {
                    return Err(Error::Config("discrete noise: bad values/weights".into()));
                }
                Ok(NoiseSampler::Discrete(
                    values.clone(),
                    weights.iter().map(|w| w / total).collect(),
                    *dim,
                ))
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha20Rng) -> DVector<f64> {
        match self {
            NoiseSampler::Zero(d) => DVector::zeros(*d),
            NoiseSampler::Gaussian(sd) => {
                DVector::from_iterator(sd.len(), sd.iter().map(|s| { let z: f64 = StandardNormal.sample(rng); s * z }))
            }
            NoiseSampler::Discrete(values, probs, dim) => {
                let support: Vec<DVector<f64>> =
                    values.iter().map(|&v| DVector::from_element(1, v)).collect();
                DVector::from_iterator(*dim, (0..*dim).map(|_| sample_discrete(&support, probs, rng)[0]))
            }
        }
    }
}

/// Everything a run needs, built once per campaign.
pub struct CampaignSetup {
    pub dynamics: Option<Box<dyn DynamicsModel>>,
    pub measurement: Box<dyn MeasurementModel>,
    pub filters: Vec<FilterConfig>,
    pub process: NoiseMoments,
    pub meas_noise: NoiseMoments,
    pub process_sampler: NoiseSampler,
    pub meas_sampler: NoiseSampler,
    pub initial: GaussianState,
    pub initial_sd: DVector<f64>,
    pub dt: f64,
}

impl CampaignSetup {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let mean = DVector::from_column_slice(&scenario.initial.mean);
        let var = DVector::from_column_slice(&scenario.initial.cov_diag);
        Ok(Self {
            dynamics: scenario.dynamics(),
            measurement: scenario.measurement(),
            filters: scenario.filter_configs()?,
            process: scenario.process_noise.moments()?,
            meas_noise: scenario.measurement_noise.moments()?,
            process_sampler: NoiseSampler::new(&scenario.process_noise)?,
            meas_sampler: NoiseSampler::new(&scenario.measurement_noise)?,
            initial: GaussianState::new(mean, DMatrix::from_diagonal(&var), 0.0)?,
            initial_sd: var.map(f64::sqrt),
            dt: scenario.dt()?,
        })
    }

    /// Truth trajectory and measurements for one run. Draw order: initial
    /// state, then per step the process kick followed by the measurement noise.
    pub fn simulate_truth(&self, rng: &mut ChaCha20Rng, steps: usize) -> Result<TruthRun> {
        let n = self.initial.mean.len();
        let z = DVector::from_iterator(n, (0..n).map(|_| -> f64 { StandardNormal.sample(rng) }));
        let mut x = &self.initial.mean + self.initial_sd.component_mul(&z);
        let mut states = Vec::with_capacity(steps);
        let mut measurements = Vec::with_capacity(steps);
        for _ in 0..steps {
            if let Some(dynamics) = &self.dynamics {
                let w = self.process_sampler.sample(rng);
                x = dynamics.propagate(&x, &w, self.dt)?;
            }
            let eta = self.meas_sampler.sample(rng);
            measurements.push(self.measurement.measure(&x, &eta)?);
            states.push(x.clone());
        }
        Ok(TruthRun { states, measurements })
    }

    /// Filter one measurement sequence; returns posteriors, stopping at the first failure.
    pub fn run_filter(
        &self,
        cfg: &FilterConfig,
        measurements: &[DVector<f64>],
    ) -> (Vec<GaussianState>, Option<(usize, String)>) {
        let mut state = self.initial.clone();
        let mut out = Vec::with_capacity(measurements.len());
        for (k, y) in measurements.iter().enumerate() {
            let next = match &self.dynamics {
                Some(d) => step(
                    &state,
                    d.as_ref(),
                    self.measurement.as_ref(),
                    &self.process,
                    &self.meas_noise,
                    cfg,
                    self.dt,
                    Some(y),
                ),
                None => do_update(&state, self.measurement.as_ref(), &self.meas_noise, cfg, y),
            };
            match next {
                Ok(s) if s.mean.iter().all(|v| v.is_finite()) => {
                    state = s;
                    state.epoch = (k + 1) as f64 * self.dt;
                    out.push(state.clone());
                }
                Ok(_) => return (out, Some((k + 1, "non-finite state estimate".into()))),
                Err(e) => return (out, Some((k + 1, e.to_string()))),
            }
        }
        (out, None)
    }
}

struct RunRecord {
    truth: TruthRun,
    digest: String,
    per_filter: Vec<(Vec<f64>, Vec<f64>, bool, Option<(usize, String)>)>,
}

/// Run every filter on `mc_runs` paired truth/measurement streams.
pub fn run_campaign(scenario: &Scenario) -> Result<McResult> {
    let setup = CampaignSetup::new(scenario)?;
    let steps = scenario.schedule.steps;
    let n = scenario.state_dim();
    let groups = scenario.groups();
    let initial_sigma: Vec<f64> = groups
        .iter()
        .map(|g| scenario.initial.cov_diag[g.start..g.start + g.len].iter().sum::<f64>().sqrt())
        .collect();
    let limit = scenario.divergence_factor * initial_sigma[0];

    let records: Vec<RunRecord> = (0..scenario.mc_runs)
        .into_par_iter()
        .map(|run| -> Result<RunRecord> {
            let mut rng = run_rng(scenario.base_seed, run);
            let truth = setup.simulate_truth(&mut rng, steps)?;
            let digest = truth.digest();
            let mut per_filter = Vec::with_capacity(setup.filters.len());
            for cfg in &setup.filters {
                let consumed = truth.measurements.clone();
                if digest_stream(&consumed) != digest {
                    return Err(Error::Config("measurement stream mismatch between filters".into()));
                }
                let (posteriors, failure) = setup.run_filter(cfg, &consumed);
                let mut errors = vec![f64::NAN; steps * n];
                let mut est = vec![f64::NAN; steps * groups.len()];
                let mut diverged = failure.is_some();
                for (k, post) in posteriors.iter().enumerate() {
                    let e = &post.mean - &truth.states[k];
                    errors[k * n..(k + 1) * n].copy_from_slice(e.as_slice());
                    for (gi, g) in groups.iter().enumerate() {
                        est[k * groups.len() + gi] =
                            (g.start..g.start + g.len).map(|i| post.cov[(i, i)]).sum();
                    }
                    let g0 = &groups[0];
                    if e.rows(g0.start, g0.len).norm() > limit {
                        diverged = true;
                    }
                }
                per_filter.push((errors, est, diverged, failure));
            }
            Ok(RunRecord { truth, digest, per_filter })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut filters: Vec<FilterRuns> = setup
        .filters
        .iter()
        .map(|cfg| FilterRuns {
            name: cfg.name(),
            errors: Vec::with_capacity(scenario.mc_runs * steps * n),
            est_var: Vec::with_capacity(scenario.mc_runs * steps * groups.len()),
            diverged: Vec::with_capacity(scenario.mc_runs),
            failures: Vec::with_capacity(scenario.mc_runs),
        })
        .collect();
    let mut truth = Vec::with_capacity(scenario.mc_runs * steps * n);
    let mut measurements = Vec::new();
    let mut stream_digests = Vec::with_capacity(scenario.mc_runs);
    for rec in records {
        for x in &rec.truth.states {
            truth.extend_from_slice(x.as_slice());
        }
        for y in &rec.truth.measurements {
            measurements.extend_from_slice(y.as_slice());
        }
        stream_digests.push(rec.digest);
        for (f, (errors, est, diverged, failure)) in filters.iter_mut().zip(rec.per_filter) {
            f.errors.extend(errors);
            f.est_var.extend(est);
            f.diverged.push(diverged);
            f.failures.push(failure);
        }
    }
    Ok(McResult {
        config_hash: scenario.config_hash(),
        base_seed: scenario.base_seed,
        runs: scenario.mc_runs,
        steps,
        state_dim: n,
        meas_dim: scenario.meas_dim(),
        groups,
        initial_sigma,
        truth,
        measurements,
        stream_digests,
        filters,
    })
}
