//! Scenario files, Monte Carlo campaigns, metrics and CSV output.

pub mod campaign;
pub mod config;
pub mod emit;
pub mod metrics;
pub mod mmse_fit;

pub use campaign::{run_campaign, run_rng, CampaignSetup, FilterRuns, McResult, NoiseSampler, TruthRun};
pub use config::{Group, InitialSpec, ModelSpec, NoiseSpec, Scenario, ScenarioName, Schedule};
pub use emit::{emit, manifest, FailureRecord, read_errors_csv, read_rmse_csv, read_sigma_csv, Manifest};
pub use metrics::{filter_rmse, group_error_norm, rmse, rmse_with_se, run_rmse, sigma_curves, SigmaRow};
pub use mmse_fit::{fit_polynomial_mmse, MmseFit};
