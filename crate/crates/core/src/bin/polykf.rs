use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use polykf::error::{Error, Result};
use polykf::harness::{
    emit, filter_rmse, fit_polynomial_mmse, rmse_with_se, run_campaign, run_rng, CampaignSetup, Scenario,
};
use polykf::sigma::{check_gaussian_moments, cut_points};

const OUT_DIR_ENV: &str = "POLYKF_OUT_DIR";
const MOMENT_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "polykf", version, about = "Polynomial-update sigma-point filter benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write errors.csv, sigma.csv, rmse.csv and manifest.json.
    Run {
        config: PathBuf,
        /// Output directory (default: $POLYKF_OUT_DIR or out/<scenario>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated filter names, e.g. UKF,QUKF,QCUKF-4.
        #[arg(long, value_delimiter = ',')]
        filters: Option<Vec<String>>,
    },
    /// Fit order-1..3 polynomial MMSE baselines to the scenario's samples.
    MmseFit {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        max_order: usize,
    },
    /// Check CUT point sets against every standard-Gaussian raw moment.
    ValidateCut {
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
    },
}

fn out_dir(cli_out: Option<PathBuf>, scenario: &Scenario) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| {
            let name = serde_json::to_value(scenario.name)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_else(|| "scenario".into());
            Path::new("out").join(name)
        })
}

fn cmd_run(
    config: &Path,
    out: Option<PathBuf>,
    runs: Option<usize>,
    seed: Option<u64>,
    filters: Option<Vec<String>>,
) -> Result<()> {
    let mut scenario = Scenario::load(config)?;
    if let Some(r) = runs {
        scenario.mc_runs = r;
    }
    if let Some(s) = seed {
        scenario.base_seed = s;
    }
    if let Some(f) = filters {
        scenario.filters = f;
    }
    scenario.validate()?;
    let result = run_campaign(&scenario)?;
    let dir = out_dir(out, &scenario);
    emit(&result, &dir, scenario.include_diverged_in_sigma)?;
    println!("{:<12} {:>24} {:>9}", "filter", "rmse", "diverged");
    for (f, fr) in result.filters.iter().enumerate() {
        let r = filter_rmse(&result, f).unwrap_or(f64::NAN);
        println!("{:<12} {:>24.16e} {:>9}", fr.name, r, result.diverged_count(f));
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_mmse_fit(config: &Path, out: Option<PathBuf>, max_order: usize) -> Result<()> {
    let scenario = Scenario::load(config)?;
    if scenario.schedule.steps != 1 {
        return Err(Error::Config("mmse-fit needs a single-update scenario (steps = 1)".into()));
    }
    let setup = CampaignSetup::new(&scenario)?;
    let s = scenario.mc_runs;
    let mut xs = DMatrix::zeros(scenario.state_dim(), s);
    let mut ys = DMatrix::zeros(scenario.meas_dim(), s);
    for r in 0..s {
        let truth = setup.simulate_truth(&mut run_rng(scenario.base_seed, r), 1)?;
        xs.set_column(r, &truth.states[0]);
        ys.set_column(r, &truth.measurements[0]);
    }
    let dir = out_dir(out, &scenario);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("mmse.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(["order", "rmse", "se"]).map_err(|e| Error::Io(e.to_string()))?;
    println!("{:<6} {:>24} {:>24}", "order", "rmse", "se");
    for order in 1..=max_order {
        let fit = fit_polynomial_mmse(&xs, &ys, order)?;
        let mut errs = Vec::with_capacity(s * xs.nrows());
        for r in 0..s {
            let e = fit.predict(&ys.column(r).into_owned())? - xs.column(r);
            errs.extend(e.iter().copied());
        }
        let (rmse, se) = rmse_with_se(&errs)?;
        println!("{order:<6} {rmse:>24.16e} {se:>24.16e}");
        w.write_record([order.to_string(), format!("{rmse:.16e}"), format!("{se:.16e}")])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_validate_cut(order: Option<usize>, dim: Option<usize>) -> Result<bool> {
    let orders = order.map(|c| vec![c]).unwrap_or_else(|| vec![4, 6, 8]);
    let dims = dim.map(|n| vec![n]).unwrap_or_else(|| (1..=6).collect());
    let mut all_ok = true;
    println!(
        "{:>3} {:>5} {:>7} {:>12} {:>12} {:>12}  status",
        "n", "order", "points", "min_weight", "even_err", "odd_max"
    );
    for &c in &orders {
        for &n in &dims {
            let set = cut_points(n, c)?;
            let check = check_gaussian_moments(&set, c);
            let ok = check.max_even_error <= MOMENT_TOL && check.max_odd_abs == 0.0;
            all_ok &= ok;
            println!(
                "{n:>3} {c:>5} {:>7} {:>12.4e} {:>12.4e} {:>12.4e}  {}",
                set.len(),
                set.w_mean.min(),
                check.max_even_error,
                check.max_odd_abs,
                if ok { "PASS" } else { "FAIL" }
            );
        }
    }
    Ok(all_ok)
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_config_error() || matches!(e, Error::Io(_)) {
        ExitCode::from(2)
    } else {
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out, runs, seed, filters } => cmd_run(&config, out, runs, seed, filters).map(|_| true),
        Command::MmseFit { config, out, max_order } => cmd_mmse_fit(&config, out, max_order).map(|_| true),
        Command::ValidateCut { order, dim } => cmd_validate_cut(order, dim),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => exit_for(&e),
    }
}
