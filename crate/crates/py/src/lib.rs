//! Python bindings.
//!
//! Results are returned as plain Python objects (dicts, lists, complex
//! numbers); library errors raise `HamspecError(message, exit_code)` with the
//! same exit codes as the command line tool.

use std::path::{Path, PathBuf};

use hamspec::classify::{classify, CaseKind};
use hamspec::config::RunConfig;
use hamspec::matrix::CMat;
use hamspec::model::{builtin, HamSequence, SystemCoefficients};
use hamspec::report::{self, ReportBundle, Timings};
use hamspec::solution::FundamentalMatrix;
use hamspec::spectral::{approximate, defining_residual, eigenvalues_regular, RegularResolvent, SingularResolvent};
use hamspec::{Error, C64};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyComplex;

create_exception!(pyhamspec, HamspecError, PyException);

fn err(e: Error) -> PyErr {
    HamspecError::new_err((e.to_string(), e.exit_code()))
}

/// Serialize with serde and hand the result to Python's json module.
fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| err(Error::MalformedParams(e.to_string())))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn matrix_to_py(py: Python<'_>, m: &CMat) -> Vec<Vec<Py<PyComplex>>> {
    (0..m.rows()).map(|i| m.row(i).iter().map(|z| PyComplex::from_doubles(py, z.re, z.im).unbind()).collect()).collect()
}

/// A discrete linear Hamiltonian system.
#[pyclass(name = "System", frozen)]
struct PySystem {
    inner: SystemCoefficients,
}

#[pymethods]
impl PySystem {
    /// Built-in system by name; `params` is a JSON object string.
    #[staticmethod]
    #[pyo3(signature = (name, params = "{}"))]
    fn builtin(name: &str, params: &str) -> PyResult<Self> {
        let params: serde_json::Value =
            serde_json::from_str(params).map_err(|e| err(Error::MalformedParams(e.to_string())))?;
        Ok(PySystem { inner: builtin(name, &params).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn start(&self) -> i64 {
        self.inner.start()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    /// Same system with λ replaced by λ + s.
    fn shifted(&self, s: f64) -> Self {
        PySystem { inner: self.inner.shifted(s) }
    }

    /// The 2n × 2n matrix J.
    fn j(&self, py: Python<'_>) -> Vec<Vec<Py<PyComplex>>> {
        matrix_to_py(py, &self.inner.j())
    }

    /// Fundamental matrix Φ(t, λ) with Φ(a, λ) = I.
    fn fundamental(&self, py: Python<'_>, lam: C64, t: i64) -> PyResult<Vec<Vec<Py<PyComplex>>>> {
        let mut phi = FundamentalMatrix::new(&self.inner, lam);
        let m = phi.at(t).map_err(err)?;
        Ok(matrix_to_py(py, &m))
    }

    /// Deficiency index and case at +∞ with default options.
    fn classify(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let label = classify(&self.inner, &Default::default()).map_err(err)?;
        to_py(py, &label)
    }

    fn __repr__(&self) -> String {
        format!("System(label={:?}, n={}, start={})", self.inner.label(), self.inner.n(), self.inner.start())
    }
}

/// A run configuration, as read by the command line tool.
#[pyclass(name = "Config", frozen)]
struct PyConfig {
    inner: RunConfig,
}

impl PyConfig {
    fn system_inner(&self) -> PyResult<SystemCoefficients> {
        self.inner.system().map_err(err)
    }
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyConfig { inner: RunConfig::load(&path).map_err(err)? })
    }

    /// Parse a configuration; relative paths in it resolve against `base_dir`.
    #[staticmethod]
    #[pyo3(signature = (text, base_dir = "."))]
    fn from_json(text: &str, base_dir: &str) -> PyResult<Self> {
        Ok(PyConfig { inner: RunConfig::from_json(text, Path::new(base_dir)).map_err(err)? })
    }

    fn system(&self) -> PyResult<PySystem> {
        Ok(PySystem { inner: self.system_inner()? })
    }

    fn schedule(&self) -> PyResult<Vec<i64>> {
        self.inner.schedule().map_err(err)
    }

    /// Classification with the configured tolerances.
    fn classify(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let label = classify(&self.system_inner()?, &self.inner.classify_options()).map_err(err)?;
        to_py(py, &label)
    }

    /// Eigenvalues of the truncation at b, in original (unshifted) units,
    /// as a list of (signed index, λ) pairs plus solver diagnostics.
    fn eigenvalues(&self, py: Python<'_>, b: i64) -> PyResult<Py<PyAny>> {
        let sys = self.system_inner()?;
        let (shifted, bc) = self.inner.truncation(&sys, b).map_err(err)?;
        let list = eigenvalues_regular(&shifted, &bc, &self.inner.eigen_options()).map_err(err)?;
        let s = self.inner.shift;
        let indexed: Vec<(i64, f64)> = report::signed_indices(&list).into_iter().map(|(k, v)| (k, v + s)).collect();
        let out = serde_json::json!({
            "b": b,
            "shift": s,
            "eigenvalues": indexed,
            "hermitian_residual": list.hermitian_residual,
            "mu": list.mu + s,
        });
        to_py(py, &out)
    }

    /// Trajectories, bounds and defects along the schedule. With `out`, the
    /// report files are written there as well.
    #[pyo3(signature = (out = None))]
    fn approximate(&self, py: Python<'_>, out: Option<PathBuf>) -> PyResult<Py<PyAny>> {
        let cfg = &self.inner;
        let schedule = cfg.schedule().map_err(err)?;
        let sys = self.system_inner()?;
        let case = cfg.resolve_case(&sys).map_err(err)?;
        let desc = cfg.descriptor(&sys, &case).map_err(err)?;
        let rep = py.detach(|| approximate(&desc, &schedule, &cfg.approx_options())).map_err(err)?;
        let bundle = ReportBundle {
            version: env!("CARGO_PKG_VERSION"),
            system: sys.label().to_string(),
            config: cfg,
            case: &case,
            approximation: &rep,
        };
        if let Some(dir) = out {
            report::write_approx(&dir, &bundle, &Timings::default()).map_err(err)?;
        }
        to_py(py, &bundle)
    }

    /// Resolvent applied to the configured forcing term at z (default: the
    /// configured point). With b the truncated problem is used, otherwise the
    /// half-line resolvent (limit-circle case only).
    #[pyo3(signature = (z = None, b = None))]
    fn resolvent(&self, py: Python<'_>, z: Option<C64>, b: Option<i64>) -> PyResult<Py<PyAny>> {
        let cfg = &self.inner;
        let spec = cfg
            .resolvent
            .as_ref()
            .ok_or_else(|| err(Error::MalformedParams("the config has no 'resolvent' section".into())))?;
        let z = z.unwrap_or(C64::new(spec.z[0], spec.z[1]));
        let zs = z - cfg.shift;
        let sys = self.system_inner()?;
        let g = cfg.forcing(&sys).map_err(err)?;
        let (shifted, y): (SystemCoefficients, HamSequence) = match b {
            Some(b) => {
                let (shifted, bc) = cfg.truncation(&sys, b).map_err(err)?;
                let y = RegularResolvent::new(&shifted, &bc, zs).and_then(|r| r.apply(&g)).map_err(err)?;
                (shifted, y)
            }
            None => {
                let case = cfg.resolve_case(&sys).map_err(err)?;
                if case.kind != CaseKind::LimitCircle {
                    return Err(err(Error::MalformedParams(format!(
                        "the half-line resolvent needs the limit-circle case (case is {:?}); pass b",
                        case.kind
                    ))));
                }
                let desc = cfg.descriptor(&sys, &case).map_err(err)?;
                let end = spec.end.unwrap_or((g.end() + 1).max(sys.start() + 32));
                let y = SingularResolvent::new(&desc, zs, &g, cfg.limit_options())
                    .and_then(|mut r| r.sequence(end))
                    .map_err(err)?;
                (desc.system().clone(), y)
            }
        };
        let residual = if y.end() > y.start {
            defining_residual(&shifted, &y, &g, zs, y.start..=y.end() - 1).map_err(err)?
        } else {
            0.0
        };
        let values: Vec<Vec<Py<PyComplex>>> = (y.start..=y.end())
            .map(|t| y.get_or_zero(t).iter().map(|v| PyComplex::from_doubles(py, v.re, v.im).unbind()).collect())
            .collect();
        let out = pyo3::types::PyDict::new(py);
        out.set_item("start", y.start)?;
        out.set_item("values", values)?;
        out.set_item("residual", residual)?;
        Ok(out.into_any().unbind())
    }

    fn __repr__(&self) -> String {
        format!("Config(shift={}, base_dir={:?})", self.inner.shift, self.inner.base_dir)
    }
}

#[pymodule]
fn pyhamspec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HamspecError", m.py().get_type::<HamspecError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyConfig>()?;
    Ok(())
}
