//! Python bindings. Reports come back as plain dicts (the JSON report
//! structure), sample records and curves as lists of floats.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use qms_core::measurement::{transform as core_transform, MeasurementSpec};
use qms_core::oracle;
use qms_core::pipeline::{self, OscillatorConfig, RunConfig, StateConfig, SweepAxis};
use qms_core::verify::{self, VerifyOptions};
use qms_core::{indicators, Grid, GridFunction, PhysicalConstants, ProbabilityFields};

create_exception!(qms, QmsError, PyException);

fn err(e: qms_core::Error) -> PyErr {
    QmsError::new_err(format!("{} ({})", e, e.kind()))
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| QmsError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Run configuration. Leave `omega` unset for a Gaussian packet; set it for
/// the oscillator ground state.
#[pyclass(name = "RunConfig", module = "qms", skip_from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[new]
    #[pyo3(signature = (*, x0=0.0, alpha=1.0, k=0.0, omega=None, sigma=0.0, lambda_=0.0, hbar=1.0, mass=1.0,
                        n_points=4096, span_mult=10.0, samples=100_000, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        x0: f64,
        alpha: f64,
        k: f64,
        omega: Option<f64>,
        sigma: f64,
        lambda_: f64,
        hbar: f64,
        mass: f64,
        n_points: usize,
        span_mult: f64,
        samples: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let mut c = RunConfig::default();
        match omega {
            Some(omega) => c.oscillator = Some(OscillatorConfig { omega }),
            None => c.state = Some(StateConfig { x0, alpha, k }),
        }
        c.kernels.sigma = sigma;
        c.kernels.lambda = lambda_;
        c.constants = PhysicalConstants { hbar, mass };
        c.grid.n_points = n_points;
        c.grid.span_mult = span_mult;
        c.sampling.n = samples;
        c.sampling.seed = seed;
        c.validate().map_err(err)?;
        Ok(Self { inner: c })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RunConfig::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!("RunConfig({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

/// Closed forms for a Gaussian packet seen through Gaussian kernels.
#[pyclass(name = "GaussianScenario", module = "qms", skip_from_py_object)]
#[derive(Clone)]
struct PyGaussianScenario {
    inner: oracle::GaussianScenario,
}

#[pymethods]
impl PyGaussianScenario {
    #[new]
    #[pyo3(signature = (*, x0=0.0, alpha=1.0, k=0.0, sigma=0.0, lambda_=0.0, hbar=1.0, mass=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(x0: f64, alpha: f64, k: f64, sigma: f64, lambda_: f64, hbar: f64, mass: f64) -> PyResult<Self> {
        let inner = oracle::GaussianScenario::new(x0, alpha, k, sigma, lambda_)
            .with_constants(PhysicalConstants::new(hbar, mass).map_err(err)?);
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    fn momentum_spread_pr(&self) -> PyResult<f64> {
        oracle::momentum_spread_pr(&self.inner).map_err(err)
    }

    /// `(intrinsic, recorded)` parameter sets as dicts.
    fn parameters(&self, py: Python<'_>) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
        let (i, p) = oracle::closed_form_parameters(&self.inner).map_err(err)?;
        Ok((to_py(py, &i)?, to_py(py, &p)?))
    }

    fn indicators(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &oracle::closed_form_indicators(&self.inner).map_err(err)?)
    }

    fn positional_entropy_gain(&self) -> f64 {
        oracle::positional_entropy_gain(&self.inner)
    }

    fn motional_entropy_gain(&self) -> f64 {
        oracle::motional_entropy_gain(&self.inner)
    }
}

/// `{"mean_in", "stddev_in", "mean_pr", "stddev_pr", ...}` for the
/// oscillator ground state blurred by a Gaussian of width `sigma`.
#[pyfunction]
#[pyo3(signature = (omega, sigma, hbar=1.0, mass=1.0))]
fn oscillator_closed_forms(py: Python<'_>, omega: f64, sigma: f64, hbar: f64, mass: f64) -> PyResult<Py<PyAny>> {
    let mut s = oracle::OscillatorScenario::new(omega, sigma);
    s.constants = PhysicalConstants::new(hbar, mass).map_err(err)?;
    to_py(py, &oracle::oscillator_closed_forms(&s).map_err(err)?)
}

#[pyfunction]
fn analyze(py: Python<'_>, config: PyRef<'_, PyRunConfig>) -> PyResult<Py<PyAny>> {
    let inner = config.inner.clone();
    let report = py.detach(|| pipeline::analyze(&inner)).map_err(err)?.report;
    to_py(py, &report)
}

/// `(report, {label: values})`
#[pyfunction]
fn sample(py: Python<'_>, config: PyRef<'_, PyRunConfig>) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
    let inner = config.inner.clone();
    let run = py.detach(|| pipeline::sample(&inner)).map_err(err)?;
    let records: std::collections::BTreeMap<_, _> =
        run.samples.iter().map(|s| (s.label.clone(), s.values.clone())).collect();
    Ok((to_py(py, &run.analysis.report)?, to_py(py, &records)?))
}

#[pyfunction]
fn sweep(py: Python<'_>, config: PyRef<'_, PyRunConfig>, axis: &str, values: Vec<f64>) -> PyResult<Py<PyAny>> {
    let axis: SweepAxis = axis.parse().map_err(err)?;
    let inner = config.inner.clone();
    let rows = py.detach(|| pipeline::sweep(&inner, axis, &values)).map_err(err)?;
    to_py(py, &rows)
}

/// `{"density": [...], "current": [...]}`, each a list of row dicts.
#[pyfunction]
fn curves(py: Python<'_>, config: PyRef<'_, PyRunConfig>) -> PyResult<Py<PyAny>> {
    let inner = config.inner.clone();
    let c = py.detach(|| pipeline::curves(&inner)).map_err(err)?;
    to_py(py, &c)
}

/// Run the acceptance suite; one dict per criterion.
#[pyfunction]
#[pyo3(signature = (kernel_scale=1.0))]
fn run_verification(py: Python<'_>, kernel_scale: f64) -> PyResult<Py<PyAny>> {
    let outcomes = py.detach(|| verify::run_all(&VerifyOptions { kernel_scale }));
    to_py(py, &outcomes)
}

fn fields(density: Vec<f64>, current: Vec<f64>, x_min: f64, dx: f64, hbar: f64, mass: f64) -> qms_core::Result<ProbabilityFields> {
    let grid = Grid::new(x_min, dx, density.len())?;
    ProbabilityFields::new(
        GridFunction::new(grid, density)?,
        GridFunction::new(grid, current)?,
        PhysicalConstants::new(hbar, mass)?,
    )
}

/// Recorded `(density, current)` for sampled intrinsic fields on a uniform
/// grid starting at `x_min`.
#[pyfunction]
#[pyo3(signature = (density, current, x_min, dx, sigma, lambda_, hbar=1.0, mass=1.0))]
#[allow(clippy::too_many_arguments)]
fn transform(
    density: Vec<f64>,
    current: Vec<f64>,
    x_min: f64,
    dx: f64,
    sigma: f64,
    lambda_: f64,
    hbar: f64,
    mass: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let f = fields(density, current, x_min, dx, hbar, mass).map_err(err)?;
    let out = core_transform(&f, &MeasurementSpec::gaussian(sigma, lambda_)).map_err(err)?;
    Ok((
        out.fields.density().values().to_vec(),
        out.fields.current().values().to_vec(),
    ))
}

/// `(H, τ)` of sampled fields; `τ` is `None` when the current vanishes.
#[pyfunction]
fn entropies(density: Vec<f64>, current: Vec<f64>, x_min: f64, dx: f64) -> PyResult<(f64, Option<f64>)> {
    let f = fields(density, current, x_min, dx, 1.0, 1.0).map_err(err)?;
    let h = indicators::positional_entropy(f.density()).map_err(err)?;
    let tau = indicators::motional_entropy(f.current());
    Ok((h, tau.defined.then_some(tau.value)))
}

#[pymodule]
fn qms(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QmsError", m.py().get_type::<QmsError>())?;
    m.add("SCHEMA_VERSION", pipeline::SCHEMA_VERSION)?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyGaussianScenario>()?;
    m.add_function(wrap_pyfunction!(oscillator_closed_forms, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(curves, m)?)?;
    m.add_function(wrap_pyfunction!(run_verification, m)?)?;
    m.add_function(wrap_pyfunction!(transform, m)?)?;
    m.add_function(wrap_pyfunction!(entropies, m)?)?;
    Ok(())
}
