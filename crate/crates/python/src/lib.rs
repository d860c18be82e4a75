//! Python bindings. Reports come back as plain dicts.

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use chyper::construction::{build_submanifold, orbit_second_fundamental_form, rigidity_form_check, SubmanifoldSpec};
use chyper::jacobi::{self, tube_shape_operator};
use chyper::model::DEFAULT_STEP;
use chyper::numlab::{convergence_study, tube_chart, FieldOptions, DEFAULT_FD_STEP};
use chyper::spectral::{self, HypersurfaceGerm, ScanGrid, DEFAULT_TOL};
use chyper::sweep::{run_sweep, to_csv, SweepConfig};
use chyper::{Error, ModelParams};

fn err(e: Error) -> PyErr {
    match e {
        Error::VerificationFailed(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn vector(v: Vec<f64>, dim: usize) -> PyResult<DVector<f64>> {
    if v.len() != dim {
        return Err(PyValueError::new_err(format!("expected {dim} components, got {}", v.len())));
    }
    Ok(DVector::from_vec(v))
}

/// `CH^n(c)` as a solvable Lie group. Vectors are lists in the
/// orthonormal left-invariant frame `(B, Z, e_1, Je_1, ...)`.
#[pyclass(name = "ModelSpace", module = "pychyper")]
struct PyModelSpace {
    inner: chyper::ModelSpace,
}

#[pymethods]
impl PyModelSpace {
    #[new]
    fn new(n: usize, c: f64) -> PyResult<Self> {
        let params = ModelParams::new(n, c).map_err(err)?;
        Ok(Self { inner: chyper::ModelSpace::new(params).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.params().n
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.params().c
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn bracket(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        let d = self.dim();
        Ok(self.inner.bracket(&vector(x, d)?, &vector(y, d)?).data.into())
    }

    /// Levi-Civita connection on left-invariant fields.
    fn nabla(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        let d = self.dim();
        Ok(self.inner.koszul(&vector(x, d)?, &vector(y, d)?).data.into())
    }

    fn j(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.j_action(&vector(x, self.dim())?).data.into())
    }

    /// `R(x, y)z` from the connection.
    fn curvature(&self, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> PyResult<Vec<f64>> {
        let d = self.dim();
        Ok(self.inner.curvature_from_koszul(&vector(x, d)?, &vector(y, d)?, &vector(z, d)?).data.into())
    }

    fn sectional_curvature(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        let d = self.dim();
        Ok(self.inner.sectional_curvature(&vector(x, d)?, &vector(y, d)?))
    }

    #[pyo3(signature = (seed = 7, samples = 200))]
    fn verify_curvature(&self, py: Python<'_>, seed: u64, samples: usize) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.verify_curvature(seed, samples).map_err(err)?)
    }

    /// Endpoint and velocity of the geodesic from the identity with
    /// initial velocity `v`.
    #[pyo3(signature = (v, t, step = DEFAULT_STEP))]
    fn geodesic(&self, v: Vec<f64>, t: f64, step: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let vel = chyper::TangentVector { base: self.inner.identity(), vec: vector(v, self.dim())? };
        let (p, w) = self.inner.geodesic(&vel, t, step).map_err(err)?;
        Ok((p.coords.data.into(), w.vec.data.into()))
    }

    fn __repr__(&self) -> String {
        format!("ModelSpace(n={}, c={})", self.n(), self.c())
    }
}

/// The ruled minimal submanifold `W^{2n-k}_φ` at the identity.
#[pyclass(name = "Submanifold", module = "pychyper")]
struct PySubmanifold {
    inner: SubmanifoldSpec,
}

#[pymethods]
impl PySubmanifold {
    #[new]
    #[pyo3(signature = (n, k, c = -4.0, phi = std::f64::consts::FRAC_PI_2))]
    fn new(n: usize, k: usize, c: f64, phi: f64) -> PyResult<Self> {
        let params = ModelParams::new(n, c).map_err(err)?;
        Ok(Self { inner: build_submanifold(params, k, phi).map_err(err)? })
    }

    #[getter]
    fn tangent(&self) -> Vec<Vec<f64>> {
        self.inner.tangent.iter().map(|v| v.data.as_vec().clone()).collect()
    }

    #[getter]
    fn normal(&self) -> Vec<Vec<f64>> {
        self.inner.normal().iter().map(|v| v.data.as_vec().clone()).collect()
    }

    fn closure_residual(&self) -> f64 {
        self.inner.closure_residual()
    }

    fn rigidity(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let ii = orbit_second_fundamental_form(&self.inner);
        to_py(py, &rigidity_form_check(&ii, &self.inner))
    }

    /// Shape operator of the tube of radius `r`.
    #[pyo3(signature = (r, step = DEFAULT_STEP))]
    fn tube(&self, r: f64, step: f64) -> PyResult<PyGerm> {
        Ok(PyGerm { inner: tube_shape_operator(&self.inner, r, step).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }
}

/// Pointwise hypersurface data: normal, tangent frame, shape operator, J.
#[pyclass(name = "Germ", module = "pychyper")]
struct PyGerm {
    inner: HypersurfaceGerm,
}

#[pymethods]
impl PyGerm {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("malformed germ JSON: {e}")))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn shape(&self) -> Vec<Vec<f64>> {
        spectral::matrix_rows(&self.inner.shape)
    }

    #[pyo3(signature = (tol = DEFAULT_TOL))]
    fn classify(&self, py: Python<'_>, tol: f64) -> PyResult<Py<PyAny>> {
        to_py(py, &spectral::classify(&self.inner, tol).to_json())
    }
}

/// `(λ1, λ2, b1², b2²)` as functions of `λ3`.
#[pyfunction]
fn catalog_values(lambda3: f64, c: f64) -> PyResult<(f64, f64, f64, f64)> {
    spectral::catalog_values(lambda3, c).map_err(err)
}

#[pyfunction]
fn eigen_structure(py: Python<'_>, n: usize, k: usize, c: f64, r: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &spectral::eigen_structure_for_radius(n, k, c, r).map_err(err)?)
}

#[pyfunction]
fn focal_radius(lambda3: f64, c: f64) -> PyResult<f64> {
    jacobi::focal_radius(lambda3, c).map_err(err)
}

#[pyfunction]
fn special_radius(c: f64) -> PyResult<f64> {
    jacobi::special_radius(c).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (c, grid = 1000))]
fn nonexistence_scan(py: Python<'_>, c: f64, grid: usize) -> PyResult<Py<PyAny>> {
    let grid = ScanGrid { lambda3_points: grid, lambda1_points: grid };
    to_py(py, &spectral::nonexistence_scan(c, grid).map_err(err)?)
}

/// Radius sweep of tube spectra as CSV text.
#[pyfunction]
#[pyo3(signature = (n, k, c = -4.0, r_min = 0.05, r_max = 2.0, rows = 100))]
fn sweep_csv(n: usize, k: usize, c: f64, r_min: f64, r_max: f64, rows: usize) -> PyResult<String> {
    let rows = run_sweep(&SweepConfig::new(n, k, c, r_min, r_max, rows)).map_err(err)?;
    Ok(to_csv(&rows))
}

#[pyfunction]
#[pyo3(signature = (n, k, c = -4.0, r_min = 0.05, r_max = 2.0, rows = 100))]
fn sweep(py: Python<'_>, n: usize, k: usize, c: f64, r_min: f64, r_max: f64, rows: usize) -> PyResult<Py<PyAny>> {
    to_py(py, &run_sweep(&SweepConfig::new(n, k, c, r_min, r_max, rows)).map_err(err)?)
}

/// Finite-difference residual suite on a tube, at `2 fd_step` and `fd_step`.
#[pyfunction]
#[pyo3(signature = (n = 3, k = 2, c = -4.0, r = 0.7, fd_step = DEFAULT_FD_STEP, step = DEFAULT_STEP))]
fn residuals(py: Python<'_>, n: usize, k: usize, c: f64, r: f64, fd_step: f64, step: f64) -> PyResult<Py<PyAny>> {
    let spec = build_submanifold(ModelParams::new(n, c).map_err(err)?, k, std::f64::consts::FRAC_PI_2).map_err(err)?;
    let chart = tube_chart(&spec, r, step, fd_step).map_err(err)?;
    let at = chart.center.clone();
    let report = convergence_study(&chart, &at, FieldOptions::default()).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("report", to_py(py, &report)?)?;
    out.set_item("max_residual", report.fine.max())?;
    out.set_item("converged", report.converged(1.8))?;
    Ok(out.into_any().unbind())
}

#[pymodule]
fn pychyper(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelSpace>()?;
    m.add_class::<PySubmanifold>()?;
    m.add_class::<PyGerm>()?;
    m.add_function(wrap_pyfunction!(catalog_values, m)?)?;
    m.add_function(wrap_pyfunction!(eigen_structure, m)?)?;
    m.add_function(wrap_pyfunction!(focal_radius, m)?)?;
    m.add_function(wrap_pyfunction!(special_radius, m)?)?;
    m.add_function(wrap_pyfunction!(nonexistence_scan, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(residuals, m)?)?;
    Ok(())
}
