//! Python bindings for the `gammask` core library.

use gammask::deconvolution::{deconvolve, grid_with_points};
use gammask::evaluation::{run_study as core_run_study, Law, StudyConfig};
use gammask::optimizer::select as core_select;
use gammask::{BiasConstant, DatasetSummary, GammaNoiseParams, MeasureTable, PrivacyBudget, ShapeGrid};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Frontier = Vec<(f64, f64, f64, f64)>;
type Estimate = (Vec<f64>, Vec<f64>, Vec<f64>, f64);

fn to_py(e: gammask::Error) -> PyErr {
    match e {
        gammask::Error::InvalidParameter(_) | gammask::Error::UnsupportedShape(_) | gammask::Error::DegenerateData(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn budget(q: f64, delta: f64) -> PyResult<PrivacyBudget> {
    PrivacyBudget::new(q, delta).map_err(to_py)
}

fn bias(name: &str) -> PyResult<BiasConstant> {
    name.parse().map_err(to_py)
}

/// Two-sided Gamma noise with the given shape and scale.
#[pyclass(name = "GammaNoise", module = "gammask", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyGammaNoise {
    inner: GammaNoiseParams,
}

#[pymethods]
impl PyGammaNoise {
    #[new]
    fn new(shape: f64, scale: f64) -> PyResult<Self> {
        Ok(Self { inner: GammaNoiseParams::new(shape, scale).map_err(to_py)? })
    }

    #[getter]
    fn shape(&self) -> f64 {
        self.inner.shape()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    fn density(&self, x: f64) -> f64 {
        self.inner.density(x)
    }

    fn fourier_transform(&self, t: f64) -> f64 {
        self.inner.fourier_transform(t)
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    /// `(c1, c2)` of the polynomial sandwich on the transform; shape < 1 only.
    fn ordinary_smooth_bounds(&self) -> PyResult<(f64, f64)> {
        let b = self.inner.ordinary_smooth_bounds().map_err(to_py)?;
        Ok((b.c1, b.c2))
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        self.inner.sample(n, seed)
    }

    /// Masked copy of `data`.
    fn obfuscate(&self, data: Vec<f64>, seed: u64) -> Vec<f64> {
        let noise = self.inner.sample(data.len(), seed);
        data.iter().zip(&noise).map(|(x, y)| x + y).collect()
    }

    fn __repr__(&self) -> String {
        format!("GammaNoise(shape={}, scale={})", self.inner.shape(), self.inner.scale())
    }
}

/// Noise scale at which the plug-in confidentiality level equals `q`.
#[pyfunction]
#[pyo3(signature = (data, shape, q=0.75, delta=0.9))]
fn calibrate_scale(data: Vec<f64>, shape: f64, q: f64, delta: f64) -> PyResult<f64> {
    let data = DatasetSummary::new(data).map_err(to_py)?;
    Ok(MeasureTable::new(&data).calibrate(shape, &budget(q, delta)?).map_err(to_py)?.scale)
}

/// Plug-in confidentiality level of `data` under `noise`.
#[pyfunction]
#[pyo3(signature = (data, noise, delta=0.9))]
fn empirical_mu(data: Vec<f64>, noise: PyGammaNoise, delta: f64) -> PyResult<f64> {
    let data = DatasetSummary::new(data).map_err(to_py)?;
    MeasureTable::new(&data).mu(&noise.inner, delta).map_err(to_py)
}

/// Sweeps the shape grid and returns the optimal noise plus the frontier
/// as a list of `(shape, scale, bandwidth, objective)`.
#[pyfunction]
#[pyo3(signature = (data, q=0.75, delta=0.9, theta_grid="0.05:1:0.05", bias_constant="paper"))]
fn select(data: Vec<f64>, q: f64, delta: f64, theta_grid: &str, bias_constant: &str) -> PyResult<(PyGammaNoise, Frontier)> {
    let data = DatasetSummary::new(data).map_err(to_py)?;
    let grid: ShapeGrid = theta_grid.parse().map_err(to_py)?;
    let report = core_select(&data, &budget(q, delta)?, &grid.values(), bias(bias_constant)?).map_err(to_py)?;
    let frontier = report.frontier.iter().map(|p| (p.shape, p.calibrated_scale, p.bandwidth, p.objective)).collect();
    Ok((PyGammaNoise { inner: report.optimal_params() }, frontier))
}

/// Deconvolution estimate from masked values: `(x, density, cdf, bandwidth)`.
#[pyfunction]
#[pyo3(signature = (masked, noise, grid_size=201, bias_constant="paper"))]
fn estimate(masked: Vec<f64>, noise: PyGammaNoise, grid_size: usize, bias_constant: &str) -> PyResult<Estimate> {
    let grid = grid_with_points(&masked, grid_size).map_err(to_py)?;
    let (est, sel) = deconvolve(&masked, &noise.inner, &grid, bias(bias_constant)?).map_err(to_py)?;
    Ok((est.grid, est.density, est.cdf, sel.bandwidth))
}

/// Monte Carlo comparison; returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (distribution, n=1000, replications=100, seed=0, q=0.75, delta=0.9, fast=false, bias_constant="paper"))]
#[allow(clippy::too_many_arguments)]
fn run_study<'py>(
    py: Python<'py>,
    distribution: &str,
    n: usize,
    replications: usize,
    seed: u64,
    q: f64,
    delta: f64,
    fast: bool,
    bias_constant: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let law: Law = distribution.parse().map_err(to_py)?;
    let mut config = StudyConfig::new(law, n, replications, seed);
    config.budget = budget(q, delta)?;
    config.bias = bias(bias_constant)?;
    config.reselect_per_replication = !fast;
    let report = py.detach(|| core_run_study(&config)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("sampling_error", report.sampling_error)?;
    out.set_item("laplace_error", report.laplace_error)?;
    out.set_item("optimal_error", report.optimal_error)?;
    out.set_item("ratio", report.ratio)?;
    out.set_item("optimal_noise", PyGammaNoise { inner: report.optimal_params })?;
    out.set_item("replications_used", report.replications_used)?;
    Ok(out)
}

#[pymodule]
fn gammask_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGammaNoise>()?;
    m.add_function(wrap_pyfunction!(calibrate_scale, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_mu, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
