//! Python bindings. Reports come back as plain dicts/lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use trimirror::bichromatic::{combined_performance, design, optimize_placement, DesignDrives};
use trimirror::config::RunConfig;
use trimirror::coupling::{self, Regime};
use trimirror::dynamics;
use trimirror::langevin::{equipartition_temperature, estimate_spectrum, estimate_variance, simulate, NoiseSpec};
use trimirror::modespectrum::{self, Branch};
use trimirror::thermometry;

fn err(e: trimirror::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py(py: Python<'_>, v: &impl Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn branch(name: &str) -> PyResult<Branch> {
    match name {
        "even" => Ok(Branch::Even),
        "odd" => Ok(Branch::Odd),
        _ => Err(PyValueError::new_err(format!("branch must be 'even' or 'odd', got {name:?}"))),
    }
}

fn regime(name: Option<&str>) -> PyResult<Option<Regime>> {
    match name {
        None => Ok(None),
        Some("linear") => Ok(Some(Regime::Linear)),
        Some("quadratic") => Ok(Some(Regime::Quadratic)),
        Some(o) => Err(PyValueError::new_err(format!("regime must be 'linear' or 'quadratic', got {o:?}"))),
    }
}

#[pyclass(name = "CavityGeometry", frozen)]
struct PyGeometry(modespectrum::CavityGeometry);

#[pymethods]
impl PyGeometry {
    #[new]
    #[pyo3(signature = (length, transmissivity, end_transmissivity, decay_rate=None, finesse=None))]
    fn new(
        length: f64,
        transmissivity: f64,
        end_transmissivity: f64,
        decay_rate: Option<f64>,
        finesse: Option<f64>,
    ) -> PyResult<Self> {
        let mut g = modespectrum::CavityGeometry::new(length, transmissivity, end_transmissivity).map_err(err)?;
        match (decay_rate, finesse) {
            (Some(_), Some(_)) => return Err(PyValueError::new_err("give only one of decay_rate, finesse")),
            (Some(r), None) => g = g.with_decay_rate(r).map_err(err)?,
            (None, Some(f)) => g = g.with_finesse(f).map_err(err)?,
            (None, None) => {}
        }
        Ok(Self(g))
    }

    #[getter]
    fn length(&self) -> f64 {
        self.0.length()
    }

    #[getter]
    fn transmissivity(&self) -> f64 {
        self.0.transmissivity()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    fn __repr__(&self) -> String {
        format!(
            "CavityGeometry(length={}, transmissivity={}, gamma={})",
            self.0.length(),
            self.0.transmissivity(),
            self.0.gamma()
        )
    }
}

#[pyclass(name = "CavityMode", frozen)]
struct PyMode(modespectrum::CavityMode);

#[pymethods]
impl PyMode {
    #[staticmethod]
    fn number(geom: &PyGeometry, n: i64) -> PyResult<Self> {
        Ok(Self(modespectrum::CavityMode::number(&geom.0, n).map_err(err)?))
    }

    #[staticmethod]
    fn from_wavelength(wavelength: f64) -> PyResult<Self> {
        Ok(Self(modespectrum::CavityMode::from_wavelength(wavelength).map_err(err)?))
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.0.omega()
    }

    #[getter]
    fn wavelength(&self) -> f64 {
        self.0.wavelength()
    }

    #[getter]
    fn mode_number(&self) -> Option<i64> {
        self.0.mode_number()
    }

    fn __repr__(&self) -> String {
        format!("CavityMode(omega={}, wavelength={})", self.0.omega(), self.0.wavelength())
    }
}

#[pyclass(name = "MechanicalOscillator", frozen)]
struct PyMechanics(dynamics::MechanicalOscillator);

#[pymethods]
impl PyMechanics {
    #[new]
    #[pyo3(signature = (mass, omega_m, damping, bath_temperature, rest_position=0.0))]
    fn new(mass: f64, omega_m: f64, damping: f64, bath_temperature: f64, rest_position: f64) -> PyResult<Self> {
        dynamics::MechanicalOscillator::new(mass, omega_m, damping, bath_temperature, rest_position)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass
    }

    #[getter]
    fn omega_m(&self) -> f64 {
        self.0.omega_m
    }

    #[getter]
    fn damping(&self) -> f64 {
        self.0.damping
    }

    #[getter]
    fn quality_factor(&self) -> f64 {
        self.0.quality_factor()
    }
}

#[pyclass(name = "DriveField", frozen)]
struct PyDrive(dynamics::DriveField);

#[pymethods]
impl PyDrive {
    #[new]
    #[pyo3(signature = (power, detuning=0.0, branch="odd"))]
    fn new(power: f64, detuning: f64, branch: &str) -> PyResult<Self> {
        dynamics::DriveField::new(power, detuning, self::branch(branch)?)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn power(&self) -> f64 {
        self.0.power
    }

    #[getter]
    fn detuning(&self) -> f64 {
        self.0.detuning
    }

    #[getter]
    fn branch(&self) -> &'static str {
        self.0.branch.as_str()
    }
}

/// `(omega_even, omega_odd)` [rad/s] at mirror position `q` [m].
#[pyfunction]
fn branch_frequencies(geom: &PyGeometry, mode: &PyMode, q: f64) -> PyResult<(f64, f64)> {
    modespectrum::branch_frequencies(&geom.0, &mode.0, q).map_err(err)
}

/// Rows `(n, branch, q, omega)` ordered by n, q, branch.
#[pyfunction]
fn spectrum_sweep(geom: &PyGeometry, modes: Vec<i64>, q: Vec<f64>) -> PyResult<Vec<(i64, &'static str, f64, f64)>> {
    let rows = modespectrum::spectrum_sweep(&geom.0, &modes, &q).map_err(err)?;
    Ok(rows.iter().map(|p| (p.n, p.branch.as_str(), p.q, p.omega)).collect())
}

/// Signed linear coupling `xi_L(q0)` [rad s^-1 m^-1], no regime check.
#[pyfunction]
fn linear_coupling(geom: &PyGeometry, mode: &PyMode, q0: f64) -> PyResult<f64> {
    coupling::linear_coupling_at(&geom.0, &mode.0, q0).map_err(err)
}

/// `xi_Q` [rad s^-1 m^-2].
#[pyfunction]
fn quadratic_coupling(geom: &PyGeometry, mode: &PyMode) -> PyResult<f64> {
    coupling::quadratic_coupling(&geom.0, &mode.0).map_err(err)
}

#[pyfunction]
fn coupling_regime(mode: &PyMode, q0: f64) -> PyResult<&'static str> {
    coupling::coupling_regime(&mode.0, q0, coupling::default_window(&mode.0))
        .map(|r| r.as_str())
        .map_err(err)
}

/// `(omega_eff, D_eff)` of the quadratic trap.
#[pyfunction]
fn effective_quadratic(geom: &PyGeometry, mode: &PyMode, mech: &PyMechanics, drive: &PyDrive) -> PyResult<(f64, f64)> {
    let r = dynamics::effective_params_quadratic(&geom.0, &mode.0, &mech.0, &drive.0).map_err(err)?;
    Ok((r.omega_sq.sqrt(), r.damping))
}

/// Eigenvalue/Routh-Hurwitz stability of the quadratic configuration.
#[pyfunction]
fn quadratic_stability(
    py: Python<'_>,
    geom: &PyGeometry,
    mode: &PyMode,
    mech: &PyMechanics,
    drive: &PyDrive,
) -> PyResult<Py<PyAny>> {
    let sys = dynamics::quadratic_system(&geom.0, &mode.0, &mech.0, &drive.0).map_err(err)?;
    to_py(py, &dynamics::stability(&sys.drift))
}

/// `pi / (m omega_eff^2 D)`.
#[pyfunction]
fn variance_integral(mass: f64, omega_eff: f64, damping: f64) -> PyResult<f64> {
    thermometry::variance_integral_analytic(mass, omega_eff, damping).map_err(err)
}

/// A validated run configuration (bundled preset or JSON text).
#[pyclass(name = "RunConfig")]
struct PyRunConfig(RunConfig);

#[pymethods]
impl PyRunConfig {
    /// `"table-one"`, `"linear-cooling"` or `"sde-demo"`.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Self(match name {
            "table-one" => RunConfig::table_one(),
            "linear-cooling" => RunConfig::linear_cooling(),
            "sde-demo" => RunConfig::sde_demo(),
            _ => return Err(PyValueError::new_err(format!("unknown preset {name:?}"))),
        }))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg = RunConfig::from_json(text).map_err(err)?;
        cfg.resolve().map_err(err)?;
        Ok(Self(cfg))
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn geometry(&self) -> PyResult<PyGeometry> {
        Ok(PyGeometry(self.0.resolve().map_err(err)?.geometry))
    }

    fn mode(&self) -> PyResult<PyMode> {
        Ok(PyMode(self.0.resolve().map_err(err)?.mode))
    }

    fn mechanics(&self) -> PyResult<PyMechanics> {
        Ok(PyMechanics(self.0.resolve().map_err(err)?.mechanics))
    }

    /// `(omega_eff^2, D_eff)` at each probe frequency.
    #[pyo3(signature = (omegas, regime=None))]
    fn effective(&self, omegas: Vec<f64>, regime: Option<&str>) -> PyResult<Vec<(f64, f64)>> {
        let r = self.0.resolve().map_err(err)?;
        let reg = match self::regime(regime)? {
            Some(x) => x,
            None => r.regime().map_err(err)?,
        };
        let resp = r.response(reg).map_err(err)?;
        Ok(omegas.iter().map(|&w| (resp.omega_eff_sq(w), resp.damping_at(w))).collect())
    }

    /// Effective temperature, occupation and Taylor validity.
    #[pyo3(signature = (regime=None))]
    fn thermal_summary(&self, py: Python<'_>, regime: Option<&str>) -> PyResult<Py<PyAny>> {
        let r = self.0.resolve().map_err(err)?;
        let reg = match self::regime(regime)? {
            Some(x) => x,
            None => r.regime().map_err(err)?,
        };
        let resp = r.response(reg).map_err(err)?;
        to_py(py, &thermometry::thermal_summary(&r.mechanics, &resp).map_err(err)?)
    }

    /// Stochastic run of the configured system: variance, equipartition
    /// temperature and fitted spectrum.
    #[pyo3(signature = (n_traj=None, seed=None))]
    fn simulate(&self, py: Python<'_>, n_traj: Option<usize>, seed: Option<u64>) -> PyResult<Py<PyAny>> {
        let r = self.0.resolve().map_err(err)?;
        let reg = r.regime().map_err(err)?;
        let sys = r.system(reg).map_err(err)?;
        let resp = r.response(reg).map_err(err)?;
        let mut sim = self.0.sde.simulation.clone();
        if let Some(n) = n_traj {
            sim.n_traj = n;
        }
        let noise = NoiseSpec::new(r.geometry.gamma(), &r.mechanics, seed.unwrap_or(self.0.sde.seed));
        // the heavy part runs without the interpreter lock
        let (ens, var, spec) = py
            .detach(|| -> trimirror::Result<_> {
                let ens = simulate(&sys, &noise, &sim)?;
                let var = estimate_variance(&ens, self.0.sde.burn_in)?;
                let spec = estimate_spectrum(&ens, r.mechanics.mass, &self.0.sde.spectrum).ok();
                Ok((ens, var, spec))
            })
            .map_err(err)?;
        let omega = resp.omega_eff(r.mechanics.omega_m);
        let (t, t_se) = equipartition_temperature(r.mechanics.mass, omega, &var);
        let spectrum = spec.map(|s| (s.omega_eff, s.omega_eff_se, s.damping, s.damping_se));
        to_py(
            py,
            &serde_json::json!({
                "n_traj": ens.n_traj,
                "relaxation_time": ens.relaxation_time,
                "variance": var,
                "temperature": t,
                "temperature_se": t_se,
                "predicted_omega_eff": omega,
                "predicted_damping": resp.damping_at(omega),
                "spectrum": spectrum.map(|(w, wse, d, dse)| serde_json::json!({
                    "omega_eff": w, "omega_eff_se": wse, "damping": d, "damping_se": dse,
                })),
            }),
        )
    }

    /// Two-colour design with its performance and placement sweep.
    #[pyo3(signature = (lambda_d=None))]
    fn design(&self, py: Python<'_>, lambda_d: Option<f64>) -> PyResult<Py<PyAny>> {
        let r = self.0.resolve().map_err(err)?;
        let gamma = r.geometry.gamma();
        let opts = self.0.design.as_ref();
        let lambda_d = lambda_d.or_else(|| opts.and_then(|o| o.lambda_d)).unwrap_or(r.mode.wavelength());
        let drives = match opts {
            Some(o) => {
                let (t, d) = (o.trap.resolve(gamma).map_err(err)?, o.damp.resolve(gamma).map_err(err)?);
                DesignDrives {
                    trap_power: t.power,
                    trap_detuning: t.detuning,
                    damp_power: d.power,
                    damp_detuning: d.detuning,
                }
            }
            None => DesignDrives::standard(gamma),
        };
        let d = design(&r.geometry, lambda_d, &drives).map_err(err)?;
        let perf = combined_performance(&d, &r.geometry, &r.mechanics).map_err(err)?;
        let opt = optimize_placement(&r.geometry, &d, opts.map_or(2001, |o| o.sweep_points)).map_err(err)?;
        to_py(py, &serde_json::json!({"design": d, "performance": perf, "placement": opt}))
    }
}

#[pymodule]
#[pyo3(name = "trimirror")]
fn trimirror_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGeometry>()?;
    m.add_class::<PyMode>()?;
    m.add_class::<PyMechanics>()?;
    m.add_class::<PyDrive>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_function(wrap_pyfunction!(branch_frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(linear_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(coupling_regime, m)?)?;
    m.add_function(wrap_pyfunction!(effective_quadratic, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_stability, m)?)?;
    m.add_function(wrap_pyfunction!(variance_integral, m)?)?;
    Ok(())
}
