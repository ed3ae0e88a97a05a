//! Python bindings: rotations, the variational integrator, the attitude
//! controller, rotor coefficients and the scenario runner.

use geomech::aero::{self, RotorGeometry};
use geomech::attitude::{self, AttitudeGains, AttitudeReference};
use geomech::rigid_body::{kinetic_energy, spatial_momentum, InertiaTensor, RigidBodyState};
use geomech::scenario::{parse_scenario, SimError};
use geomech::sim::{metrics_json, run, Overrides};
use geomech::so3::{self, Mat3, RotationMatrix, Vec3};
use geomech::variational::{simulate, IntegratorConfig};
use geomech::GeomError;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Rows = [[f64; 3]; 3];

fn geom_err(e: GeomError) -> PyErr {
    match e.root() {
        GeomError::NoConvergence { .. } | GeomError::InflowNoConvergence { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::Parse { .. } | SimError::Validation(_) => PyValueError::new_err(e.to_string()),
        SimError::Solver(g) => PyRuntimeError::new_err(g.to_string()),
        SimError::Io(_) | SimError::Csv(_) => PyOSError::new_err(e.to_string()),
    }
}

fn mat(rows: &Rows) -> Mat3 {
    Mat3::from_fn(|i, j| rows[i][j])
}

fn rows(m: &Mat3) -> Rows {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn inertia(diag: [f64; 3]) -> PyResult<InertiaTensor> {
    InertiaTensor::diagonal(diag[0], diag[1], diag[2]).map_err(geom_err)
}

/// A proper rotation matrix.
#[pyclass(name = "Rotation", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyRotation(RotationMatrix);

#[pymethods]
impl PyRotation {
    /// Checked construction from rows.
    #[new]
    fn new(rows: Rows) -> PyResult<Self> {
        RotationMatrix::new(mat(&rows)).map(Self).map_err(geom_err)
    }

    #[staticmethod]
    fn identity() -> Self {
        Self(RotationMatrix::identity())
    }

    /// Rodrigues exponential of a rotation vector.
    #[staticmethod]
    fn exp(v: [f64; 3]) -> Self {
        Self(so3::exp_so3(&Vec3::from(v)))
    }

    #[staticmethod]
    fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        Self(RotationMatrix::from_axis_angle(&Vec3::from(axis), angle))
    }

    fn matrix(&self) -> Rows {
        rows(self.0.matrix())
    }

    /// Rotation vector with norm in [0, π].
    fn log(&self) -> [f64; 3] {
        so3::log_so3(&self.0).into()
    }

    fn angle(&self) -> f64 {
        self.0.angle()
    }

    fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        self.0.rotate(&Vec3::from(v)).into()
    }

    fn orthogonality_defect(&self) -> f64 {
        self.0.orthogonality_defect()
    }

    fn __mul__(&self, other: &PyRotation) -> Self {
        Self(self.0 * other.0)
    }

    fn __repr__(&self) -> String {
        format!("Rotation({:?})", self.matrix())
    }
}

#[pyfunction]
fn hat(v: [f64; 3]) -> Rows {
    rows(&so3::hat(&Vec3::from(v)))
}

#[pyfunction]
fn vee(m: Rows) -> PyResult<[f64; 3]> {
    so3::vee(&mat(&m)).map(Into::into).map_err(geom_err)
}

#[pyfunction]
fn tilde(m: Rows) -> Rows {
    rows(&so3::tilde(&mat(&m)))
}

/// Geodesic midpoint of two rotations.
#[pyfunction]
fn rotation_mean(a: &PyRotation, b: &PyRotation) -> PyResult<PyRotation> {
    so3::rotation_mean(&a.0, &b.0).map(PyRotation).map_err(geom_err)
}

#[pyfunction]
fn attitude_error_psi(r: &PyRotation, r_d: &PyRotation) -> PyResult<f64> {
    attitude::attitude_error_psi(&r.0, &r_d.0).map_err(geom_err)
}

#[pyfunction]
fn attitude_error_vector(r: &PyRotation, r_d: &PyRotation) -> PyResult<[f64; 3]> {
    attitude::attitude_error_vector(&r.0, &r_d.0).map(Into::into).map_err(geom_err)
}

/// Backstepping torque. Gains default to `P = F = J`, `S = I`, `k_R = 1`.
#[pyfunction]
#[pyo3(signature = (r, omega, r_d, inertia_diag, omega_d=[0.0; 3], omega_d_dot=[0.0; 3], p=None, f=None, k_r=1.0))]
#[allow(clippy::too_many_arguments)]
fn control_torque(
    r: &PyRotation,
    omega: [f64; 3],
    r_d: &PyRotation,
    inertia_diag: [f64; 3],
    omega_d: [f64; 3],
    omega_d_dot: [f64; 3],
    p: Option<Rows>,
    f: Option<Rows>,
    k_r: f64,
) -> PyResult<[f64; 3]> {
    let j = inertia(inertia_diag)?;
    let gains = AttitudeGains::new(
        p.map(|m| mat(&m)).unwrap_or(*j.matrix()),
        f.map(|m| mat(&m)).unwrap_or(*j.matrix()),
        k_r,
        Mat3::identity(),
    )
    .map_err(geom_err)?;
    let reference = AttitudeReference {
        r_d: r_d.0,
        omega_d: Vec3::from(omega_d),
        omega_d_dot: Vec3::from(omega_d_dot),
    };
    attitude::control_torque(&r.0, &Vec3::from(omega), &reference, &j, &gains)
        .map(Into::into)
        .map_err(geom_err)
}

/// Free (or constantly torqued) rigid body under the variational integrator.
/// Returns a dict of per-step lists.
#[pyfunction]
#[pyo3(signature = (inertia_diag, omega0, dt, t_final, attitude0=None, torque=[0.0; 3], newton_tol=1e-12))]
#[allow(clippy::too_many_arguments)]
fn simulate_free_body<'py>(
    py: Python<'py>,
    inertia_diag: [f64; 3],
    omega0: [f64; 3],
    dt: f64,
    t_final: f64,
    attitude0: Option<PyRotation>,
    torque: [f64; 3],
    newton_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let j = inertia(inertia_diag)?;
    let cfg = IntegratorConfig {
        newton_tol,
        ..IntegratorConfig::new(dt).map_err(geom_err)?
    };
    let initial = RigidBodyState::new(attitude0.map(|r| r.0).unwrap_or_else(RotationMatrix::identity), Vec3::from(omega0));
    let m = Vec3::from(torque);
    let traj = py
        .detach(|| simulate(&initial, &j, |_, _, _| m, &cfg, t_final))
        .map_err(geom_err)?;
    let out = PyDict::new(py);
    out.set_item("t", &traj.times)?;
    out.set_item("attitude", traj.states.iter().map(|s| rows(s.attitude.matrix())).collect::<Vec<_>>())?;
    out.set_item("omega", traj.states.iter().map(|s| <[f64; 3]>::from(s.omega)).collect::<Vec<_>>())?;
    out.set_item("energy", traj.states.iter().map(|s| kinetic_energy(s, &j)).collect::<Vec<_>>())?;
    out.set_item(
        "momentum",
        traj.states
            .iter()
            .map(|s| <[f64; 3]>::from(spatial_momentum(s, &j)))
            .collect::<Vec<_>>(),
    )?;
    out.set_item("newton_iters", traj.steps.iter().map(|s| s.newton_iters).collect::<Vec<_>>())?;
    Ok(out)
}

/// Rotor blade geometry with the closed-form aerodynamic coefficients.
#[pyclass(name = "RotorGeometry", frozen)]
struct PyRotorGeometry(RotorGeometry);

#[pymethods]
impl PyRotorGeometry {
    #[new]
    #[pyo3(signature = (blades, chord, radius, theta0, theta_tw, cd_bar, lift_slope=aero::DEFAULT_LIFT_SLOPE))]
    fn new(blades: u32, chord: f64, radius: f64, theta0: f64, theta_tw: f64, cd_bar: f64, lift_slope: f64) -> PyResult<Self> {
        RotorGeometry::new(blades, chord, radius, lift_slope, theta0, theta_tw, cd_bar)
            .map(Self)
            .map_err(geom_err)
    }

    #[getter]
    fn solidity(&self) -> f64 {
        self.0.solidity()
    }

    fn thrust_coefficient(&self, inflow: f64, advance: f64) -> f64 {
        aero::thrust_coefficient(&self.0, inflow, advance)
    }

    fn hub_force_coefficient(&self, inflow: f64, advance: f64) -> f64 {
        aero::hub_force_coefficient(&self.0, inflow, advance)
    }

    fn torque_coefficient(&self, inflow: f64, advance: f64) -> f64 {
        aero::torque_coefficient(&self.0, inflow, advance)
    }

    fn roll_moment_coefficient(&self, inflow: f64, advance: f64) -> f64 {
        aero::roll_moment_coefficient(&self.0, inflow, advance)
    }

    /// Rotor speed giving `thrust` in static hover.
    #[pyo3(signature = (thrust, rho=aero::DEFAULT_AIR_DENSITY))]
    fn hover_rotor_speed(&self, thrust: f64, rho: f64) -> PyResult<f64> {
        aero::hover_rotor_speed(&self.0, rho, thrust).map_err(geom_err)
    }
}

/// Lists every problem with a scenario; empty when it is valid.
#[pyfunction]
fn validate_scenario(text: &str) -> PyResult<Vec<String>> {
    let scenario = match parse_scenario(text.as_bytes()) {
        Ok(s) => s,
        Err(e) => return Ok(vec![e.to_string()]),
    };
    match scenario.validate() {
        Ok(_) => Ok(vec![]),
        Err(SimError::Validation(issues)) => Ok(issues.iter().map(ToString::to_string).collect()),
        Err(e) => Err(sim_err(e)),
    }
}

/// Runs a scenario given as JSON text. Returns `(columns, rows, metrics_json)`.
#[pyfunction]
#[pyo3(signature = (text, dt=None, t_final=None, aero=None))]
fn run_scenario(
    py: Python<'_>,
    text: &str,
    dt: Option<f64>,
    t_final: Option<f64>,
    aero: Option<bool>,
) -> PyResult<(Vec<String>, Vec<Vec<f64>>, String)> {
    let mut scenario = parse_scenario(text.as_bytes()).map_err(sim_err)?;
    Overrides { dt, t_final, aero }.apply(&mut scenario).map_err(sim_err)?;
    let setup = scenario.validate().map_err(sim_err)?;
    let out = py.detach(|| run(&setup)).map_err(sim_err)?;
    let metrics = metrics_json(&out.metrics);
    Ok((out.series.columns, out.series.rows, metrics))
}

#[pymodule(name = "geomech")]
fn geomech_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRotation>()?;
    m.add_class::<PyRotorGeometry>()?;
    m.add_function(wrap_pyfunction!(hat, m)?)?;
    m.add_function(wrap_pyfunction!(vee, m)?)?;
    m.add_function(wrap_pyfunction!(tilde, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_mean, m)?)?;
    m.add_function(wrap_pyfunction!(attitude_error_psi, m)?)?;
    m.add_function(wrap_pyfunction!(attitude_error_vector, m)?)?;
    m.add_function(wrap_pyfunction!(control_torque, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_free_body, m)?)?;
    m.add_function(wrap_pyfunction!(validate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
