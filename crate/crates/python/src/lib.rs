//! Python bindings: filter configurations, point sets, single updates,
//! noise moments, dynamics helpers and Monte Carlo campaigns.
//!
//! Vectors cross the boundary as `list[float]`, matrices as row-major
//! `list[list[float]]`.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, Vector6};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use polykf::error::Error;
use polykf::filter::{do_update, FilterConfig, GaussianState, NoiseMode, SigmaRule};
use polykf::harness::{emit, filter_rmse, fit_polynomial_mmse, run_campaign, Scenario};
use polykf::models::{cr3bp_energy, cr3bp_propagate, cw_stm, IntegratorSettings, LinearMeasurement, ScalarArctan};
use polykf::moments::{compound_measurement_moments, gaussian_moments, NoiseMoments};
use polykf::sigma::{cut_points, ut_points, SigmaSet, UtParams};

create_exception!(polykf_py, NumericalError, PyException);

fn to_py(e: Error) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// A parsed filter name such as `"QACUKF-4"`.
#[pyclass(name = "FilterConfig", module = "polykf_py", from_py_object)]
#[derive(Clone)]
struct PyFilterConfig {
    inner: FilterConfig,
}

#[pymethods]
impl PyFilterConfig {
    #[new]
    #[pyo3(signature = (name, reuse_sigma_points = false))]
    fn new(name: &str, reuse_sigma_points: bool) -> PyResult<Self> {
        let mut inner: FilterConfig = name.parse().map_err(to_py)?;
        inner.reuse_sigma_points = reuse_sigma_points;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name()
    }

    #[getter]
    fn update_order(&self) -> usize {
        self.inner.update_order
    }

    #[getter]
    fn augmented(&self) -> bool {
        self.inner.noise_mode == NoiseMode::Augmented
    }

    /// `"ut"` or `"cut4"`, `"cut6"`, `"cut8"`.
    #[getter]
    fn sigma_rule(&self) -> String {
        match self.inner.sigma_rule {
            SigmaRule::Ut(_) => "ut".into(),
            SigmaRule::Cut(c) => format!("cut{c}"),
        }
    }

    #[getter]
    fn reuse_sigma_points(&self) -> bool {
        self.inner.reuse_sigma_points
    }

    fn __repr__(&self) -> String {
        format!("FilterConfig({:?})", self.inner.name())
    }
}

/// Mean and covariance of a Gaussian state estimate.
#[pyclass(name = "GaussianState", module = "polykf_py", from_py_object)]
#[derive(Clone)]
struct PyGaussianState {
    inner: GaussianState,
}

#[pymethods]
impl PyGaussianState {
    #[new]
    #[pyo3(signature = (mean, cov, epoch = 0.0))]
    fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>, epoch: f64) -> PyResult<Self> {
        let inner = GaussianState::new(vector(&mean), matrix(&cov)?, epoch).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean.iter().copied().collect()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.cov)
    }

    #[getter]
    fn epoch(&self) -> f64 {
        self.inner.epoch
    }

    fn __repr__(&self) -> String {
        format!("GaussianState(mean={:?})", self.mean())
    }
}

fn sigma_dict<'py>(py: Python<'py>, set: &SigmaSet) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let points: Vec<Vec<f64>> = (0..set.points.ncols())
        .map(|j| set.points.column(j).iter().copied().collect())
        .collect();
    d.set_item("points", points)?;
    d.set_item("w_mean", set.w_mean.iter().copied().collect::<Vec<_>>())?;
    d.set_item("w_cov", set.w_cov.iter().copied().collect::<Vec<_>>())?;
    Ok(d)
}

/// Standard-normal CUT point set: `{"points": [[..], ..], "w_mean": [..], "w_cov": [..]}`.
#[pyfunction]
fn cut_point_set<'py>(py: Python<'py>, dim: usize, order: usize) -> PyResult<Bound<'py, PyDict>> {
    let set = cut_points(dim, order).map_err(to_py)?;
    sigma_dict(py, &set)
}

/// Scaled unscented points for `N(mean, cov)`; `kappa=None` means `3 − n`.
#[pyfunction]
#[pyo3(signature = (mean, cov, alpha = 1.0, beta = 2.0, kappa = None))]
fn ut_point_set<'py>(
    py: Python<'py>,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    alpha: f64,
    beta: f64,
    kappa: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let set = ut_points(&vector(&mean), &matrix(&cov)?, &UtParams { alpha, beta, kappa }).map_err(to_py)?;
    sigma_dict(py, &set)
}

fn moments_dict<'py>(py: Python<'py>, nm: &NoiseMoments) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("cov", rows(&nm.cov))?;
    d.set_item("skew", rows(&nm.skew))?;
    d.set_item("kurt", rows(&nm.kurt))?;
    Ok(d)
}

/// Covariance, `E[η (η⊗η)ᵀ]` and `E[(η⊗η)(η⊗η)ᵀ]` of a zero-mean Gaussian.
#[pyfunction(name = "gaussian_moments")]
fn py_gaussian_moments<'py>(py: Python<'py>, cov: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let nm = gaussian_moments(&matrix(&cov)?).map_err(to_py)?;
    moments_dict(py, &nm)
}

/// `(P_yy, P_yy², P_y²y²)` of a noiseless signal plus independent Gaussian noise.
#[pyfunction(name = "compound_measurement_moments")]
fn py_compound(
    pyy_bar: Vec<Vec<f64>>,
    pyy2_bar: Vec<Vec<f64>>,
    py2y2_bar: Vec<Vec<f64>>,
    noise_cov: Vec<Vec<f64>>,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let nm = gaussian_moments(&matrix(&noise_cov)?).map_err(to_py)?;
    let (a, b, c) =
        compound_measurement_moments(&matrix(&pyy_bar)?, &matrix(&pyy2_bar)?, &matrix(&py2y2_bar)?, &nm)
            .map_err(to_py)?;
    Ok((rows(&a), rows(&b), rows(&c)))
}

/// One update with `y = H x + η`, `η ~ N(0, R)`.
#[pyfunction]
fn linear_update(
    prior: &PyGaussianState,
    h: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    y: Vec<f64>,
    config: &PyFilterConfig,
) -> PyResult<PyGaussianState> {
    let model = LinearMeasurement { h: matrix(&h)? };
    let noise = gaussian_moments(&matrix(&r)?).map_err(to_py)?;
    let inner = do_update(&prior.inner, &model, &noise, &config.inner, &vector(&y)).map_err(to_py)?;
    Ok(PyGaussianState { inner })
}

/// One update with `y = arctan(x) + η`, `η ~ N(0, r)`.
#[pyfunction]
fn arctan_update(prior: &PyGaussianState, r: f64, y: f64, config: &PyFilterConfig) -> PyResult<PyGaussianState> {
    let noise = gaussian_moments(&DMatrix::from_element(1, 1, r)).map_err(to_py)?;
    let inner = do_update(&prior.inner, &ScalarArctan, &noise, &config.inner, &DVector::from_element(1, y))
        .map_err(to_py)?;
    Ok(PyGaussianState { inner })
}

/// Least-squares polynomial MMSE fit of order `order`; returns the in-sample RMSE.
#[pyfunction]
fn mmse_fit_rmse(xs: Vec<Vec<f64>>, ys: Vec<Vec<f64>>, order: usize) -> PyResult<f64> {
    let fit = fit_polynomial_mmse(&matrix(&xs)?, &matrix(&ys)?, order).map_err(to_py)?;
    Ok(fit.rmse)
}

fn six(state: &[f64]) -> PyResult<Vector6<f64>> {
    if state.len() != 6 {
        return Err(PyValueError::new_err(format!("expected 6 components, got {}", state.len())));
    }
    Ok(Vector6::from_column_slice(state))
}

#[pyfunction]
#[pyo3(signature = (state, mu, dt, rel_tol = 1e-12, abs_tol = 1e-12))]
fn cr3bp_flow(state: Vec<f64>, mu: f64, dt: f64, rel_tol: f64, abs_tol: f64) -> PyResult<Vec<f64>> {
    let settings = IntegratorSettings {
        rel_tol,
        abs_tol,
        ..IntegratorSettings::default()
    };
    let out = cr3bp_propagate(&six(&state)?, mu, dt, &settings).map_err(to_py)?;
    Ok(out.iter().copied().collect())
}

#[pyfunction]
fn jacobi_energy(state: Vec<f64>, mu: f64) -> PyResult<f64> {
    Ok(cr3bp_energy(&six(&state)?, mu))
}

/// Closed-form CW transition matrix for mean motion `alpha` over `dt` seconds.
#[pyfunction]
fn cw_transition(alpha: f64, dt: f64) -> Vec<Vec<f64>> {
    let phi = cw_stm(alpha, dt);
    (0..6).map(|i| phi.row(i).iter().copied().collect()).collect()
}

/// Run a scenario file's Monte Carlo campaign.
///
/// Returns `{filter: rmse}`; with `out` set the CSVs and manifest are written there.
#[pyfunction]
#[pyo3(signature = (config, runs = None, seed = None, filters = None, out = None))]
fn run_scenario(
    py: Python<'_>,
    config: PathBuf,
    runs: Option<usize>,
    seed: Option<u64>,
    filters: Option<Vec<String>>,
    out: Option<PathBuf>,
) -> PyResult<Vec<(String, f64)>> {
    let mut scenario = Scenario::load(&config).map_err(to_py)?;
    if let Some(r) = runs {
        scenario.mc_runs = r;
    }
    if let Some(s) = seed {
        scenario.base_seed = s;
    }
    if let Some(f) = filters {
        scenario.filters = f;
    }
    scenario.validate().map_err(to_py)?;
    let result = py.detach(|| run_campaign(&scenario)).map_err(to_py)?;
    if let Some(dir) = out {
        emit(&result, &dir, scenario.include_diverged_in_sigma).map_err(to_py)?;
    }
    Ok(result
        .filters
        .iter()
        .enumerate()
        .map(|(f, fr)| (fr.name.clone(), filter_rmse(&result, f).unwrap_or(f64::NAN)))
        .collect())
}

#[pymodule]
fn polykf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFilterConfig>()?;
    m.add_class::<PyGaussianState>()?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(cut_point_set, m)?)?;
    m.add_function(wrap_pyfunction!(ut_point_set, m)?)?;
    m.add_function(wrap_pyfunction!(py_gaussian_moments, m)?)?;
    m.add_function(wrap_pyfunction!(py_compound, m)?)?;
    m.add_function(wrap_pyfunction!(linear_update, m)?)?;
    m.add_function(wrap_pyfunction!(arctan_update, m)?)?;
    m.add_function(wrap_pyfunction!(mmse_fit_rmse, m)?)?;
    m.add_function(wrap_pyfunction!(cr3bp_flow, m)?)?;
    m.add_function(wrap_pyfunction!(jacobi_energy, m)?)?;
    m.add_function(wrap_pyfunction!(cw_transition, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
