//! Python bindings. Reports come back as plain dicts and lists.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use grr_core::bounds::{self, BSource, GrrProblem, ProblemField};
use grr_core::experiments::{self, CertificateSpec, ExperimentSpec};
use grr_core::gaussian::{self, CovarianceModel};
use grr_core::heat::{self, HeatPoint};
use grr_core::field_grid::Field;
use grr_core::{Error, PointPair};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Parameter(_) | Error::Domain(_) | Error::Hypothesis(_) | Error::Json(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::Divergent(_) => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::Model(_) | Error::Resolution(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_object<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = grr_core::report::to_json(value).map_err(to_py)?;
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

fn pair(x: Vec<f64>, y: Vec<f64>) -> PyResult<PointPair> {
    PointPair::new(x, y).map_err(to_py)
}

/// Values on a rectangular grid in [0,1]ⁿ, row-major with the last axis fastest.
#[pyclass(name = "GridField", module = "grr", frozen)]
struct PyGridField {
    inner: grr_core::GridField,
}

#[pymethods]
impl PyGridField {
    #[new]
    fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: grr_core::GridField::new(axes, values).map_err(to_py)?,
        })
    }

    /// Uniform axes with the given node counts.
    #[staticmethod]
    fn uniform(shape: Vec<usize>, values: Vec<f64>) -> PyResult<Self> {
        Self::new(grr_core::GridField::uniform_axes(&shape), values)
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape()
    }

    #[getter]
    fn axes(&self) -> Vec<Vec<f64>> {
        self.inner.axes().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn value_at(&self, index: Vec<usize>) -> PyResult<f64> {
        let shape = self.inner.shape();
        if index.len() != shape.len() || index.iter().zip(&shape).any(|(i, m)| i >= m) {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.value_at(&index))
    }

    /// Joint increment over the box spanned by two grid nodes.
    fn rect_increment(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner.rect_increment(&pair(x, y)?).map_err(to_py)
    }

    fn scaled(&self, c: f64) -> Self {
        Self {
            inner: self.inner.scaled(c),
        }
    }

    fn __repr__(&self) -> String {
        format!("GridField(shape={:?})", self.inner.shape())
    }
}

/// Ψ, written `pow:<a>` or `expq`.
#[pyclass(name = "YoungFunction", module = "grr", frozen)]
struct PyYoung {
    inner: grr_core::YoungFunction,
}

#[pymethods]
impl PyYoung {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self {
            inner: spec.parse().map_err(to_py)?,
        })
    }

    fn __call__(&self, u: f64) -> f64 {
        self.inner.eval(u)
    }

    fn inverse(&self, u: f64) -> PyResult<f64> {
        self.inner.inverse(u).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("YoungFunction('{}')", self.inner)
    }
}

/// A modulus p, written `pow:<g>` or `tab:<path>`.
#[pyclass(name = "ModulusFunction", module = "grr", frozen)]
struct PyModulus {
    inner: grr_core::ModulusFunction,
}

#[pymethods]
impl PyModulus {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self {
            inner: spec.parse().map_err(to_py)?,
        })
    }

    /// Piecewise-linear modulus through the (u, p(u)) samples.
    #[staticmethod]
    fn tabulated(samples: Vec<(f64, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: grr_core::ModulusFunction::tabulated(samples).map_err(to_py)?,
        })
    }

    fn __call__(&self, u: f64) -> f64 {
        self.inner.eval(u)
    }

    fn inverse(&self, u: f64) -> PyResult<f64> {
        self.inner.inverse(u).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("ModulusFunction('{}')", self.inner)
    }
}

fn collect_moduli(list: Vec<PyRef<'_, PyModulus>>) -> Vec<grr_core::ModulusFunction> {
    list.iter().map(|m| m.inner.clone()).collect()
}

/// One of the forms h, sigma, hH, sigmaH, heat, heat_uLIL2.
#[pyclass(name = "LogModulatedModulus", module = "grr", frozen)]
struct PyLogModulus {
    inner: grr_core::LogModulatedModulus,
}

#[pymethods]
impl PyLogModulus {
    #[new]
    #[pyo3(signature = (form, hurst = Vec::new(), alpha = 0.125))]
    fn new(form: &str, hurst: Vec<f64>, alpha: f64) -> PyResult<Self> {
        Ok(Self {
            inner: grr_core::LogModulatedModulus::named(form, &hurst, alpha).map_err(to_py)?,
        })
    }

    fn __call__(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&pair(x, y)?).map_err(to_py)
    }

    #[getter]
    fn form(&self) -> &'static str {
        self.inner.form().name()
    }
}

fn fbm_or_heat(hurst: Option<Vec<f64>>) -> PyResult<CovarianceModel> {
    match hurst {
        Some(h) => CovarianceModel::fbm(h).map_err(to_py),
        None => Ok(CovarianceModel::Heat),
    }
}

/// B for a grid field.
#[pyfunction]
fn b_functional(field: &PyGridField, psi: &PyYoung, moduli: Vec<PyRef<'_, PyModulus>>) -> PyResult<f64> {
    let prob = GrrProblem::new(ProblemField::Grid(&field.inner), psi.inner, collect_moduli(moduli)).map_err(to_py)?;
    bounds::b_functional(&prob).map_err(to_py)
}

#[pyfunction]
fn grr_rhs(psi: &PyYoung, moduli: Vec<PyRef<'_, PyModulus>>, b: f64, deltas: Vec<f64>) -> PyResult<f64> {
    bounds::grr_rhs(&psi.inner, &collect_moduli(moduli), b, &deltas).map_err(to_py)
}

/// Checks the GRR inequality at every grid box; `b=None` estimates B.
#[pyfunction]
#[pyo3(signature = (field, psi, moduli, b = None, slack = None))]
fn verify_grr(
    py: Python<'_>,
    field: &PyGridField,
    psi: &PyYoung,
    moduli: Vec<PyRef<'_, PyModulus>>,
    b: Option<f64>,
    slack: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let source = b.map_or(BSource::Estimated, BSource::ClosedForm);
    let slack = slack.unwrap_or(source.default_slack());
    let (b, summary) =
        bounds::verify_grr_on_grid(&field.inner, psi.inner, &collect_moduli(moduli), slack, source).map_err(to_py)?;
    to_object(py, &serde_json::json!({ "b": b, "slack": slack, "summary": summary }))
}

#[pyfunction]
fn kolmogorov_constant(n: usize, alpha: f64, beta: Vec<f64>, eps: Vec<f64>) -> PyResult<f64> {
    bounds::kolmogorov_constant(n, alpha, &beta, &eps).map_err(to_py)
}

/// One exact draw on uniform axes; fBm when `hurst` is given, else the heat field.
#[pyfunction]
#[pyo3(signature = (shape, seed, replicate = 0, hurst = None))]
fn sample(shape: Vec<usize>, seed: u64, replicate: u64, hurst: Option<Vec<f64>>) -> PyResult<PyGridField> {
    let model = fbm_or_heat(hurst)?;
    let axes = grr_core::GridField::uniform_axes(&shape);
    Ok(PyGridField {
        inner: gaussian::sample_field(&model, &axes, seed, replicate).map_err(to_py)?,
    })
}

/// Q(x, y); fBm when `hurst` is given, else the heat field.
#[pyfunction]
#[pyo3(signature = (x, y, hurst = None))]
fn covariance(x: Vec<f64>, y: Vec<f64>, hurst: Option<Vec<f64>>) -> PyResult<f64> {
    let model = fbm_or_heat(hurst)?;
    if x.len() != model.dim() || y.len() != model.dim() {
        return Err(PyValueError::new_err("points must match the model dimension"));
    }
    Ok(model.cov(&x, &y))
}

#[pyfunction]
#[pyo3(signature = (x, y, hurst = None))]
fn increment_variance(x: Vec<f64>, y: Vec<f64>, hurst: Option<Vec<f64>>) -> PyResult<f64> {
    gaussian::increment_variance(&fbm_or_heat(hurst)?, &pair(x, y)?).map_err(to_py)
}

#[pyfunction]
fn exp_moment_check(py: Python<'_>, variance: f64, draws: u64, seed: u64) -> PyResult<Py<PyAny>> {
    let r = gaussian::exp_moment_check(variance, draws, seed).map_err(to_py)?;
    to_object(py, &r)
}

#[pyfunction]
fn heat_cov(s: f64, x: f64, t: f64, y: f64) -> f64 {
    heat::heat_cov(HeatPoint::new(s, x), HeatPoint::new(t, y))
}

#[pyfunction]
fn heat_sq_increment(s: f64, t: f64, x: f64, y: f64) -> f64 {
    heat::heat_sq_increment(s, t, x, y)
}

#[pyfunction]
fn rho(u: f64) -> f64 {
    heat::rho(u)
}

#[pyfunction]
fn sup_ratio(field: &PyGridField, modulus: &PyLogModulus, delta_max: f64) -> PyResult<f64> {
    experiments::sup_ratio(&field.inner, &modulus.inner, delta_max).map_err(to_py)
}

/// Sup-ratio statistics across grids; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (grids, replicates, seed, delta_max, form = "hH", hurst = None, alpha = 0.125, certificate = None, slack = 0.05))]
#[allow(clippy::too_many_arguments)]
fn refinement_sweep(
    py: Python<'_>,
    grids: Vec<Vec<usize>>,
    replicates: u64,
    seed: u64,
    delta_max: f64,
    form: &str,
    hurst: Option<Vec<f64>>,
    alpha: f64,
    certificate: Option<Vec<PyRef<'_, PyModulus>>>,
    slack: f64,
) -> PyResult<Py<PyAny>> {
    let modulus =
        grr_core::LogModulatedModulus::named(form, hurst.as_deref().unwrap_or(&[]), alpha).map_err(to_py)?;
    let spec = ExperimentSpec {
        model: fbm_or_heat(hurst)?,
        modulus,
        delta_max,
        replicates,
        seed,
        slack,
        certificate: certificate.map(|m| CertificateSpec {
            psi: grr_core::YoungFunction::ExpQuarterSquare,
            moduli: collect_moduli(m),
        }),
    };
    // release the interpreter while the sweep runs
    let report = py
        .detach(|| experiments::refinement_sweep(&spec, &grids))
        .map_err(to_py)?;
    to_object(py, &report)
}

#[pymodule]
fn grr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridField>()?;
    m.add_class::<PyYoung>()?;
    m.add_class::<PyModulus>()?;
    m.add_class::<PyLogModulus>()?;
    m.add_function(wrap_pyfunction!(b_functional, m)?)?;
    m.add_function(wrap_pyfunction!(grr_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(verify_grr, m)?)?;
    m.add_function(wrap_pyfunction!(kolmogorov_constant, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(covariance, m)?)?;
    m.add_function(wrap_pyfunction!(increment_variance, m)?)?;
    m.add_function(wrap_pyfunction!(exp_moment_check, m)?)?;
    m.add_function(wrap_pyfunction!(heat_cov, m)?)?;
    m.add_function(wrap_pyfunction!(heat_sq_increment, m)?)?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(sup_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(refinement_sweep, m)?)?;
    m.add("RHO_INFINITY", heat::RHO_INFINITY)?;
    Ok(())
}
