//! CSV and manifest output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::campaign::McResult;
use crate::harness::metrics::{filter_rmse, sigma_curves, SigmaRow};

pub const ERRORS_CSV: &str = "errors.csv";
pub const SIGMA_CSV: &str = "sigma.csv";
pub const RMSE_CSV: &str = "rmse.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub base_seed: u64,
    pub runs: usize,
    pub steps: usize,
    pub filters: Vec<String>,
    /// SHA-256 over the concatenated per-run measurement digests.
    pub measurement_digest: String,
    pub diverged_runs: BTreeMap<String, usize>,
    pub failed_runs: BTreeMap<String, usize>,
    pub failures: Vec<FailureRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub filter: String,
    pub run: usize,
    pub step: usize,
    pub message: String,
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

/// Write the campaign's CSVs and manifest into `out_dir` (created if missing).
pub fn emit(result: &McResult, out_dir: &Path, include_diverged: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let paths: Vec<PathBuf> = [ERRORS_CSV, SIGMA_CSV, RMSE_CSV, MANIFEST_JSON]
        .iter()
        .map(|f| out_dir.join(f))
        .collect();

    let mut w = writer(&paths[0])?;
    w.write_record(["run", "step", "filter", "component", "error"]).map_err(csv_err)?;
    for (f, fr) in result.filters.iter().enumerate() {
        for r in 0..result.runs {
            for k in 1..=result.steps {
                for (c, e) in result.error(f, r, k).iter().enumerate() {
                    w.write_record([r.to_string(), k.to_string(), fr.name.clone(), c.to_string(), fmt_f64(*e)])
                        .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush()?;

    let mut w = writer(&paths[1])?;
    w.write_record(["step", "filter", "group", "est", "eff"]).map_err(csv_err)?;
    if result.runs >= 2 {
        for row in sigma_curves(result, include_diverged)? {
            w.write_record([row.step.to_string(), row.filter, row.group, fmt_f64(row.est), fmt_f64(row.eff)])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;

    let mut w = writer(&paths[2])?;
    w.write_record(["filter", "rmse"]).map_err(csv_err)?;
    for (f, fr) in result.filters.iter().enumerate() {
        if let Some(v) = filter_rmse(result, f) {
            w.write_record([fr.name.clone(), fmt_f64(v)]).map_err(csv_err)?;
        }
    }
    w.flush()?;

    let manifest = manifest(result);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&paths[3], text + "\n")?;
    Ok(paths)
}

pub fn manifest(result: &McResult) -> Manifest {
    let mut h = Sha256::new();
    for d in &result.stream_digests {
        h.update(d.as_bytes());
    }
    Manifest {
        config_hash: result.config_hash.clone(),
        base_seed: result.base_seed,
        runs: result.runs,
        steps: result.steps,
        filters: result.filters.iter().map(|f| f.name.clone()).collect(),
        measurement_digest: hex::encode(h.finalize()),
        diverged_runs: result
            .filters
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), result.diverged_count(i)))
            .collect(),
        failed_runs: result
            .filters
            .iter()
            .map(|f| (f.name.clone(), f.failures.iter().filter(|x| x.is_some()).count()))
            .collect(),
        failures: result
            .filters
            .iter()
            .flat_map(|f| {
                f.failures.iter().enumerate().filter_map(move |(run, x)| {
                    x.as_ref().map(|(step, message)| FailureRecord {
                        filter: f.name.clone(),
                        run,
                        step: *step,
                        message: message.clone(),
                    })
                })
            })
            .collect(),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Io(format!("bad float {s:?}")))
}

pub fn read_rmse_csv(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok((rec[0].to_string(), parse_f64(&rec[1])?))
        })
        .collect()
}

pub fn read_sigma_csv(path: &Path) -> Result<Vec<SigmaRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(SigmaRow {
                step: rec[0].parse().map_err(|_| Error::Io("bad step".into()))?,
                filter: rec[1].to_string(),
                group: rec[2].to_string(),
                est: parse_f64(&rec[3])?,
                eff: parse_f64(&rec[4])?,
            })
        })
        .collect()
}

/// `(run, step, filter, component, error)` rows.
pub fn read_errors_csv(path: &Path) -> Result<Vec<(usize, usize, String, usize, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let bad = |what: &str| Error::Io(format!("bad {what}"));
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok((
                rec[0].parse().map_err(|_| bad("run"))?,
                rec[1].parse().map_err(|_| bad("step"))?,
                rec[2].to_string(),
                rec[3].parse().map_err(|_| bad("component"))?,
                parse_f64(&rec[4])?,
            ))
        })
        .collect()
}
