//! Python bindings for the matter-wave cavity simulator.

use std::path::PathBuf;

use mwfpi_core::model::{ModelParams, HBAR};
use mwfpi_core::propagator::Sampling;
use mwfpi_core::resonances::{find_resonances, ScalingSetup, DEFAULT_BASIS, DEFAULT_BOX, DEFAULT_THETA};
use mwfpi_core::runner::{self, GridSpec, ScenarioConfig, SolverSettings};
use mwfpi_core::{potentials, scattering, sensing, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Config(_) | Error::ThetaOutOfRange(_) | Error::BoxTooSmall(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Physical cavity parameters in SI units.
#[pyclass(name = "Model", from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: ModelParams,
}

#[pymethods]
impl PyModel {
    /// Reference cavity with the calibrated barrier height; keyword overrides
    /// use the JSON field names (e.g. `gravity_m_s2=-8e-4`).
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(py: Python<'_>, overrides: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut doc = serde_json::to_value(ModelParams::reference()).expect("serializable");
        if let Some(kw) = overrides {
            let text: String = py.import("json")?.call_method1("dumps", (kw,))?.extract()?;
            let extra: serde_json::Value = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
            for (k, v) in extra.as_object().into_iter().flatten() {
                if doc.get(k).is_none() {
                    return Err(PyValueError::new_err(format!("unknown model field '{k}'")));
                }
                doc[k] = v.clone();
            }
        }
        let inner: ModelParams = serde_json::from_value(doc).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(err)?;
        Ok(PyModel { inner })
    }

    #[getter]
    fn gravity_m_s2(&self) -> f64 {
        self.inner.gravity_m_s2
    }

    #[setter]
    fn set_gravity_m_s2(&mut self, g: f64) {
        self.inner.gravity_m_s2 = g;
    }

    #[getter]
    fn barrier_height_j(&self) -> f64 {
        self.inner.barrier_height_j
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    /// Reduced-unit view: stiffness, barrier_center, tilt, interaction, packet fields.
    fn reduced<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.reduced().map_err(err)?)
    }

    /// Characteristic time `ħ/V_b` in seconds.
    fn time_unit_s(&self) -> f64 {
        HBAR / self.inner.barrier_height_j
    }

    /// `|τ(E)|²` for `E/V_b` values at g = 0.
    #[pyo3(signature = (energies, tolerance=1e-3))]
    fn transmission_spectrum(&self, energies: Vec<f64>, tolerance: f64) -> PyResult<Vec<f64>> {
        let r = self.inner.reduced().map_err(err)?;
        Ok(scattering::transmission_spectrum(&r, &energies, tolerance).map_err(err)?.tau_sq)
    }

    /// Complex-scaled resonances as dicts with `energy` and `width` in `V_b`.
    #[pyo3(signature = (e_max=1.25, theta=DEFAULT_THETA, basis_size=DEFAULT_BASIS, half_width=DEFAULT_BOX))]
    fn resonances<'py>(
        &self,
        py: Python<'py>,
        e_max: f64,
        theta: f64,
        basis_size: usize,
        half_width: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let r = self.inner.reduced().map_err(err)?;
        let setup = ScalingSetup { theta, basis_size, half_width };
        let set = py.detach(|| find_resonances(&r, &setup, e_max, false)).map_err(err)?;
        to_py(py, &set.resonances)
    }

    /// Wave-packet scattering at cavity-center energy `energy` (`V_b`).
    #[pyo3(signature = (energy, half_width=600.0, n_points=4096))]
    fn transmit<'py>(&self, py: Python<'py>, energy: f64, half_width: f64, n_points: usize) -> PyResult<Bound<'py, PyAny>> {
        let grid = GridSpec { half_width, n_points };
        let params = self.inner;
        let out = py
            .detach(|| runner::transmit_point(&params, energy, &grid, &SolverSettings::default(), Sampling::default()))
            .map_err(err)?
            .2;
        to_py(py, &out)
    }

    /// Triangular-well eigenenergies in joules for `|g|`.
    fn triangular_levels(&self, n: usize) -> PyResult<Vec<f64>> {
        potentials::triangular_eigenenergies(self.inner.gravity_m_s2, self.inner.mass_kg, n).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(gravity_m_s2={:e}, barrier_height_J={:e}, packet_width_m={:e})",
            self.inner.gravity_m_s2, self.inner.barrier_height_j, self.inner.packet_width_m
        )
    }
}

/// Full width at half maximum of the Bragg pulse lineshape in units of Ω.
#[pyfunction]
fn epsilon_fw() -> f64 {
    sensing::epsilon_fw()
}

/// Bragg Rabi frequency Ω in rad/s from `E_r`, `Γ` in joules.
#[pyfunction]
fn bragg_rabi(energy_j: f64, gamma_j: f64, mass: f64, k_bragg: f64) -> PyResult<f64> {
    sensing::bragg_rabi(energy_j, gamma_j, mass, k_bragg).map_err(err)
}

/// `√N√ν·δg_R` map; rows follow `g`, columns follow `energies`.
#[pyfunction]
#[pyo3(signature = (transmission, g, energies, tilt_z0, include_propagation=true))]
fn rel_uncertainty_r(
    transmission: Vec<Vec<f64>>,
    g: Vec<f64>,
    energies: Vec<f64>,
    tilt_z0: Vec<f64>,
    include_propagation: bool,
) -> PyResult<Vec<Vec<f64>>> {
    sensing::rel_uncertainty_r(&transmission, &g, &energies, &tilt_z0, include_propagation).map_err(err)
}

/// `√N√ν·δg_−` map from `T_−` and `T_+`.
#[pyfunction]
fn rel_uncertainty_minus(t_minus: Vec<Vec<f64>>, t_plus: Vec<Vec<f64>>, g: Vec<f64>, kicks: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    sensing::rel_uncertainty_minus(&t_minus, &t_plus, &g, &kicks).map_err(err)
}

/// Runs a scenario from a JSON config string and returns the manifest.
#[pyfunction]
#[pyo3(signature = (scenario, config_json="{}", out="out", workers=1, overrides=Vec::new()))]
fn run_scenario<'py>(
    py: Python<'py>,
    scenario: &str,
    config_json: &str,
    out: &str,
    workers: usize,
    overrides: Vec<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let sc: runner::Scenario = scenario.parse().map_err(err)?;
    let config = ScenarioConfig::from_json(config_json, &overrides).map_err(err)?;
    let dir = PathBuf::from(out);
    let manifest = py.detach(|| runner::run(&config, sc, &dir, workers)).map_err(err)?;
    to_py(py, &manifest)
}

#[pymodule]
pub fn mwfpi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(epsilon_fw, m)?)?;
    m.add_function(wrap_pyfunction!(bragg_rabi, m)?)?;
    m.add_function(wrap_pyfunction!(rel_uncertainty_r, m)?)?;
    m.add_function(wrap_pyfunction!(rel_uncertainty_minus, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
