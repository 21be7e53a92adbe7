//! Python bindings: scenario runs, calibration, the energy-drift experiment,
//! phase portraits and the nonlinear spring itself.
//!
//! Configs go in as JSON text; structured results come back as plain Python
//! dicts and lists.

use fic::config::{self, ConfigError};
use fic::harness::{calibrate_sweep, phase_portrait as portrait, run_scenario as run};
use fic::{FicError, StiffnessParams};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn config_err(e: ConfigError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fic_err(e: FicError) -> PyErr {
    match e {
        FicError::InvalidStiffness(_) | FicError::Domain(_) | FicError::Precondition(_) | FicError::Dimension(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serialise through JSON into native Python objects.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Per-DoF nonlinear spring: exponential stiffness inside the boundary,
/// constant force outside.
#[pyclass(frozen, name = "Spring", module = "fic_py")]
struct Spring {
    inner: StiffnessParams,
}

#[pymethods]
impl Spring {
    #[new]
    fn new(k_const: f64, w_max: f64, x_b: f64) -> PyResult<Self> {
        Ok(Spring { inner: StiffnessParams::new(k_const, w_max, x_b).map_err(fic_err)? })
    }

    #[getter]
    fn k_const(&self) -> f64 {
        self.inner.k_const()
    }

    #[getter]
    fn w_max(&self) -> f64 {
        self.inner.w_max()
    }

    #[getter]
    fn x_b(&self) -> f64 {
        self.inner.x_b()
    }

    #[getter]
    fn k_max(&self) -> f64 {
        self.inner.k_max()
    }

    #[getter]
    fn beta_sq(&self) -> f64 {
        self.inner.beta_sq()
    }

    fn stiffness(&self, x_err: f64) -> f64 {
        self.inner.stiffness(x_err)
    }

    fn force(&self, x_err: f64) -> f64 {
        self.inner.spring_force(x_err)
    }

    fn energy(&self, x_err: f64) -> f64 {
        self.inner.spring_energy(x_err)
    }

    fn __repr__(&self) -> String {
        format!("Spring(k_const={}, w_max={}, x_b={})", self.inner.k_const(), self.inner.w_max(), self.inner.x_b())
    }
}

/// Run a scenario given as JSON text and return the episode record. A run
/// stopped by a blow-up or singularity still returns, with `failure` set.
#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn run_scenario(py: Python<'_>, config: &str, seed: Option<u64>) -> PyResult<Py<PyAny>> {
    let mut scenario = config::parse_scenario_str(config).map_err(config_err)?.body;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let record = py.detach(|| run(&scenario)).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &record)
}

/// Run a scenario and return the record as CSV text.
#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn run_csv(py: Python<'_>, config: &str, seed: Option<u64>) -> PyResult<String> {
    let mut scenario = config::parse_scenario_str(config).map_err(config_err)?.body;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let record = py.detach(|| run(&scenario)).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let mut buf = Vec::new();
    config::emit_csv(&record, &mut buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// SHA-256 of the scenario's canonical form.
#[pyfunction]
fn config_hash(config: &str) -> PyResult<String> {
    Ok(config::config_hash(&config::parse_scenario_str(config).map_err(config_err)?.body))
}

/// Calibration table for a calibration config given as JSON text.
#[pyfunction]
fn calibrate(py: Python<'_>, config: &str) -> PyResult<Py<PyAny>> {
    let cal = config::parse_calibration_str(config).map_err(config_err)?.body;
    let table = py.detach(|| calibrate_sweep(&cal.base, cal.dof, &cal.x_b, &cal.w_max_candidates));
    to_py(py, &serde_json::json!({ "rows": table.rows, "ranges": table.ranges() }))
}

/// Sampled linear-impedance work against the exact FIC work on
/// x(t) = t³ + t² + t over one second.
#[pyfunction]
#[pyo3(signature = (rates, k_d=1.0, k_p=1.0, spring=None))]
fn energy_drift(py: Python<'_>, rates: Vec<f64>, k_d: f64, k_p: f64, spring: Option<&Spring>) -> PyResult<Py<PyAny>> {
    if rates.iter().any(|r| !(*r > 0.0)) {
        return Err(PyValueError::new_err("rates must be positive"));
    }
    let p = match spring {
        Some(s) => s.inner,
        None => StiffnessParams::new(0.0, 30.0, 0.05).map_err(fic_err)?,
    };
    to_py(py, &fic::energy::energy_drift(&rates, k_d, k_p, &p))
}

/// Free undamped 1-DoF excursions, two mirrored curves per energy level.
#[pyfunction]
#[pyo3(signature = (energies, spring, inertia=1.0, dt=1e-4))]
fn phase_portrait(py: Python<'_>, energies: Vec<f64>, spring: &Spring, inertia: f64, dt: f64) -> PyResult<Py<PyAny>> {
    let p = spring.inner;
    let curves = py.detach(|| portrait(p, inertia, &energies, dt)).map_err(fic_err)?;
    to_py(py, &curves)
}

#[pymodule]
fn fic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Spring>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_csv, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(energy_drift, m)?)?;
    m.add_function(wrap_pyfunction!(phase_portrait, m)?)?;
    Ok(())
}
