//! RMSE and estimated/effective standard deviation curves.

use crate::error::{Error, Result};
use crate::harness::campaign::McResult;

/// `√(Σ ε² / N)`.
pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

/// RMSE with its delta-method standard error `sd(ε²) / (2·rmse·√N)`.
pub fn rmse_with_se(errors: &[f64]) -> Result<(f64, f64)> {
    let r = rmse(errors)?;
    let n = errors.len() as f64;
    let ms = r * r;
    let var = errors.iter().map(|e| (e * e - ms).powi(2)).sum::<f64>() / n;
    let se = if r > 0.0 { var.sqrt() / (2.0 * r * n.sqrt()) } else { 0.0 };
    Ok((r, se))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaRow {
    pub step: usize,
    pub filter: String,
    pub group: String,
    pub est: f64,
    pub eff: f64,
}

fn kept_runs(result: &McResult, filter: usize, include_diverged: bool) -> Vec<usize> {
    (0..result.runs)
        .filter(|&r| include_diverged || !result.filters[filter].diverged[r])
        .collect()
}

/// Per step and group: `σ_EST = √(mean_r tr P_g)` and `σ_EFF = √(Σ_{i∈g} var_r ε_i)`
/// with the variance normalised by the run count.
pub fn sigma_curves(result: &McResult, include_diverged: bool) -> Result<Vec<SigmaRow>> {
    if result.runs < 2 {
        return Err(Error::TooFewRuns {
            needed: 2,
            got: result.runs,
        });
    }
    let mut rows = Vec::with_capacity(result.filters.len() * result.steps * result.groups.len());
    for (f, fr) in result.filters.iter().enumerate() {
        let runs = kept_runs(result, f, include_diverged);
        let count = runs.len() as f64;
        for k in 1..=result.steps {
            for (gi, g) in result.groups.iter().enumerate() {
                let est = (runs.iter().map(|&r| result.est_var(f, r, k)[gi]).sum::<f64>() / count).sqrt();
                let mut var = 0.0;
                for i in g.start..g.start + g.len {
                    let mean = runs.iter().map(|&r| result.error(f, r, k)[i]).sum::<f64>() / count;
                    var += runs
                        .iter()
                        .map(|&r| (result.error(f, r, k)[i] - mean).powi(2))
                        .sum::<f64>()
                        / count;
                }
                rows.push(SigmaRow {
                    step: k,
                    filter: fr.name.clone(),
                    group: g.name.to_string(),
                    est,
                    eff: var.sqrt(),
                });
            }
        }
    }
    Ok(rows)
}

/// Norm of a group's error in one run at one step.
pub fn group_error_norm(result: &McResult, filter: usize, run: usize, step: usize, group: usize) -> f64 {
    let g = &result.groups[group];
    result.error(filter, run, step)[g.start..g.start + g.len]
        .iter()
        .map(|e| e * e)
        .sum::<f64>()
        .sqrt()
}

/// RMSE of one run's group error over steps `from..=steps`.
pub fn run_rmse(result: &McResult, filter: usize, run: usize, group: usize, from: usize) -> f64 {
    let g = &result.groups[group];
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in from.max(1)..=result.steps {
        for e in &result.error(filter, run, k)[g.start..g.start + g.len] {
            sum += e * e;
        }
        count += 1;
    }
    (sum / count as f64).sqrt()
}

/// Campaign RMSE of the first group (position, or the scalar state) over all
/// steps and non-diverged runs: `√(mean_{r,k} ‖ε_g‖²)`.
pub fn filter_rmse(result: &McResult, filter: usize) -> Option<f64> {
    let g = &result.groups[0];
    let runs = kept_runs(result, filter, false);
    if runs.is_empty() || result.steps == 0 {
        return None;
    }
    let mut sum = 0.0;
    for &r in &runs {
        for k in 1..=result.steps {
            sum += result.error(filter, r, k)[g.start..g.start + g.len]
                .iter()
                .map(|e| e * e)
                .sum::<f64>();
        }
    }
    Some((sum / (runs.len() * result.steps) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::campaign::FilterRuns;
    use crate::harness::config::Group;

    fn synthetic(errors: Vec<f64>, runs: usize, steps: usize) -> McResult {
        McResult {
            config_hash: String::new(),
            base_seed: 0,
            runs,
            steps,
            state_dim: 3,
            meas_dim: 1,
            groups: vec![Group { name: "pos", start: 0, len: 3 }],
            initial_sigma: vec![1.0],
            truth: vec![0.0; runs * steps * 3],
            measurements: vec![0.0; runs * steps],
            stream_digests: vec![String::new(); runs],
            filters: vec![FilterRuns {
                name: "F".into(),
                errors,
                est_var: vec![1.0; runs * steps],
                diverged: vec![false; runs],
                failures: vec![None; runs],
            }],
        }
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((rmse(&[3.0, 4.0]).unwrap() - 5.0 / 2f64.sqrt()).abs() < 1e-15);
        let e = [0.3, -1.2, 2.5];
        let scaled: Vec<f64> = e.iter().map(|v| -2.5 * v).collect();
        assert!((rmse(&scaled).unwrap() - 2.5 * rmse(&e).unwrap()).abs() < 1e-14);
        assert_eq!(rmse(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn identical_runs_have_zero_effective_sigma() {
        let r = synthetic(vec![0.7, -0.1, 0.2, 0.7, -0.1, 0.2], 2, 1);
        let rows = sigma_curves(&r, false).unwrap();
        assert_eq!(rows[0].eff, 0.0);
        assert_eq!(rows[0].est, 1.0);
    }

    #[test]
    fn known_per_axis_variance() {
        // runs at ±a on every axis: population variance a² per axis
        let a: f64 = 0.5;
        let mut errors = Vec::new();
        for r in 0..4 {
            let s = if r % 2 == 0 { a } else { -a };
            errors.extend([s + 1.0, s - 2.0, s]);
        }
        let rows = sigma_curves(&synthetic(errors, 4, 1), false).unwrap();
        assert!((rows[0].eff - (3.0 * a * a).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn needs_two_runs() {
        let r = synthetic(vec![0.0; 3], 1, 1);
        assert_eq!(sigma_curves(&r, false), Err(Error::TooFewRuns { needed: 2, got: 1 }));
    }
}
