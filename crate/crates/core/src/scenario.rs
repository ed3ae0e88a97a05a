//! Scenario files: JSON schema, parsing and validation.
//!
//! Parsing only checks syntax and field types; [`Scenario::validate`] then
//! checks every physical and numerical constraint and reports all violations
//! at once.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::aero::{InflowModel, RotorGeometry, VehicleAero, DEFAULT_AIR_DENSITY, DEFAULT_LIFT_SLOPE};
use crate::attitude::AttitudeGains;
use crate::error::GeomError;
use crate::quadrotor::PositionGains;
use crate::reference::{default_heading, CircleCoefficients, EulerCoefficients};
use crate::rigid_body::{InertiaTensor, QuadrotorParams, QuadrotorState, RigidBodyState, STANDARD_GRAVITY};
use crate::so3::{Mat3, RotationMatrix, Vec3};
use crate::variational::IntegratorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    FreeBody,
    AttitudeTrack,
    QuadTrack,
    IntegratorCompare,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::FreeBody => "free_body",
            ScenarioKind::AttitudeTrack => "attitude_track",
            ScenarioKind::QuadTrack => "quad_track",
            ScenarioKind::IntegratorCompare => "integrator_compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    Variational,
    Rk4,
}

/// A 3×3 matrix written as a scalar (times identity), a diagonal, or rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Diagonal([f64; 3]),
    Rows([[f64; 3]; 3]),
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> Mat3 {
        match *self {
            MatrixSpec::Scalar(s) => Mat3::identity() * s,
            MatrixSpec::Diagonal(d) => Mat3::from_diagonal(&Vec3::from(d)),
            MatrixSpec::Rows(r) => Mat3::from_fn(|i, j| r[i][j]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_newton_tol() -> f64 {
    IntegratorConfig::default().newton_tol
}

fn default_max_iters() -> usize {
    IntegratorConfig::default().max_iters
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            newton_tol: default_newton_tol(),
            max_iters: default_max_iters(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    /// Rows of the initial attitude; identity when absent.
    #[serde(default)]
    pub attitude: Option<[[f64; 3]; 3]>,
    #[serde(default)]
    pub omega: [f64; 3],
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeGainSpec {
    pub p: MatrixSpec,
    pub f: MatrixSpec,
    #[serde(default = "one")]
    pub k_r: f64,
    #[serde(default = "identity_spec")]
    pub s: MatrixSpec,
}

fn one() -> f64 {
    1.0
}

fn identity_spec() -> MatrixSpec {
    MatrixSpec::Scalar(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionGainSpec {
    pub a: MatrixSpec,
    pub b: MatrixSpec,
    pub c: MatrixSpec,
    pub d: MatrixSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub mass: f64,
    pub inertia: MatrixSpec,
    pub arm: f64,
    #[serde(default = "standard_gravity")]
    pub gravity: f64,
}

fn standard_gravity() -> f64 {
    STANDARD_GRAVITY
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    Circle {
        #[serde(default = "circle_amplitude")]
        amplitude: f64,
        #[serde(default = "circle_frequency")]
        frequency: f64,
        #[serde(default)]
        center: [f64; 3],
        #[serde(default = "default_heading")]
        b1d: [f64; 3],
    },
    Hover {
        position: [f64; 3],
        #[serde(default = "default_heading")]
        b1d: [f64; 3],
    },
}

fn circle_amplitude() -> f64 {
    CircleCoefficients::default().amplitude
}

fn circle_frequency() -> f64 {
    CircleCoefficients::default().frequency
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorSpec {
    pub blades: u32,
    pub chord: f64,
    pub radius: f64,
    pub theta0: f64,
    pub theta_tw: f64,
    pub cd_bar: f64,
    #[serde(default = "lift_slope")]
    pub lift_slope: f64,
}

fn lift_slope() -> f64 {
    DEFAULT_LIFT_SLOPE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InflowSpec {
    #[default]
    Coupled,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeroSpec {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "air_density")]
    pub rho: f64,
    #[serde(default)]
    pub inflow: InflowSpec,
    pub rotor: RotorSpec,
}

fn yes() -> bool {
    true
}

fn air_density() -> f64 {
    DEFAULT_AIR_DENSITY
}

/// Scenario file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Stem of the output files; the kind name when absent.
    #[serde(default)]
    pub name: Option<String>,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub integrator: Option<IntegratorKind>,
    #[serde(default)]
    pub solver: SolverSettings,
    /// Rigid-body inertia (free_body, attitude_track, integrator_compare).
    #[serde(default)]
    pub inertia: Option<MatrixSpec>,
    /// Constant body-frame torque applied to a free body.
    #[serde(default)]
    pub torque: Option<[f64; 3]>,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub attitude_gains: Option<AttitudeGainSpec>,
    #[serde(default)]
    pub attitude_reference: Option<EulerCoefficients>,
    #[serde(default)]
    pub vehicle: Option<VehicleSpec>,
    #[serde(default)]
    pub position_gains: Option<PositionGainSpec>,
    #[serde(default)]
    pub trajectory: Option<TrajectorySpec>,
    #[serde(default)]
    pub aero: Option<AeroSpec>,
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub field: String,
    pub constraint: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: must be {}", self.field, self.constraint)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario:\n{}", .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<ValidationIssue>),
    #[error("solver failure: {0}")]
    Solver(#[from] GeomError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Parses scenario JSON. Constraint checks are left to [`Scenario::validate`].
pub fn parse_scenario(text: &[u8]) -> Result<Scenario, SimError> {
    serde_json::from_slice(text).map_err(|e| SimError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Parses and validates.
pub fn load_scenario(text: &[u8]) -> Result<(Scenario, Setup), SimError> {
    let s = parse_scenario(text)?;
    let setup = s.validate()?;
    Ok((s, setup))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodySetup {
    pub inertia: InertiaTensor,
    pub initial: RigidBodyState,
    pub torque: Vec3,
    pub integrator: IntegratorKind,
    pub solver: IntegratorConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeSetup {
    pub inertia: InertiaTensor,
    pub initial: RigidBodyState,
    pub gains: AttitudeGains,
    pub reference: EulerCoefficients,
    pub integrator: IntegratorKind,
    pub solver: IntegratorConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryKind {
    Circle(CircleCoefficients),
    Hover { position: Vec3, b1d: Vec3 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadSetup {
    pub params: QuadrotorParams,
    pub initial: QuadrotorState,
    pub gains: PositionGains,
    pub attitude_gains: AttitudeGains,
    pub trajectory: TrajectoryKind,
    /// Present when the aerodynamic model is on.
    pub aero: Option<VehicleAero>,
}

/// A validated scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub kind: ScenarioKind,
    pub name: String,
    pub dt: f64,
    pub t_final: f64,
    pub model: Model,
}

// Built once per run; boxing the variants buys nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    RigidBody(RigidBodySetup),
    Attitude(AttitudeSetup),
    Quad(QuadSetup),
}

struct Issues(Vec<ValidationIssue>);

impl Issues {
    fn push(&mut self, field: impl Into<String>, constraint: impl Into<String>) {
        self.0.push(ValidationIssue {
            field: field.into(),
            constraint: constraint.into(),
        });
    }

    fn push_geom(&mut self, field: &str, e: GeomError) {
        let constraint = match e {
            GeomError::InvalidParameter { field: f, constraint } => format!("valid ({f} must be {constraint})"),
            GeomError::InvalidInertia(m) | GeomError::InvalidGains(m) => format!("valid ({m})"),
            GeomError::NotRotation { .. } => "a rotation matrix (orthonormal, det +1)".to_string(),
            other => format!("valid ({other})"),
        };
        self.push(field, constraint);
    }

    fn finite(&mut self, field: &str, values: &[f64]) -> bool {
        if values.iter().all(|v| v.is_finite()) {
            true
        } else {
            self.push(field, "finite");
            false
        }
    }

    fn required<'a, T>(&mut self, field: &str, value: &'a Option<T>, kind: ScenarioKind) -> Option<&'a T> {
        if value.is_none() {
            self.push(field, format!("present for kind {}", kind.as_str()));
        }
        value.as_ref()
    }

    fn unused<T>(&mut self, field: &str, value: &Option<T>, kind: ScenarioKind) {
        if value.is_some() {
            self.push(field, format!("absent for kind {}", kind.as_str()));
        }
    }
}

fn inertia_of(spec: &MatrixSpec, field: &str, issues: &mut Issues) -> Option<InertiaTensor> {
    let m = spec.to_matrix();
    if !issues.finite(field, m.as_slice()) {
        return None;
    }
    InertiaTensor::new(m).map_err(|e| issues.push_geom(field, e)).ok()
}

fn spd_of(spec: &MatrixSpec, field: &str, issues: &mut Issues) -> Option<Mat3> {
    let m = spec.to_matrix();
    if !issues.finite(field, m.as_slice()) {
        return None;
    }
    let sym = (m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax());
    if !sym || m.symmetric_eigenvalues().iter().any(|&l| l <= 0.0) {
        issues.push(field, "symmetric positive definite");
        return None;
    }
    Some(m)
}

fn unit_heading(b1d: [f64; 3], field: &str, issues: &mut Issues) -> Option<Vec3> {
    let v = Vec3::from(b1d);
    if !issues.finite(field, &b1d) {
        return None;
    }
    if !(v.norm() > 1e-12) {
        issues.push(field, "a nonzero vector");
        return None;
    }
    Some(v.normalize())
}

impl Scenario {
    /// Checks every constraint and builds the runnable setup.
    pub fn validate(&self) -> Result<Setup, SimError> {
        let mut issues = Issues(Vec::new());
        let kind = self.kind;

        if !(self.dt > 0.0 && self.dt.is_finite()) {
            issues.push("dt", "> 0");
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            issues.push("t_final", ">= dt");
        }
        if !(self.solver.newton_tol > 0.0 && self.solver.newton_tol.is_finite()) {
            issues.push("solver.newton_tol", "> 0");
        }
        if self.solver.max_iters == 0 {
            issues.push("solver.max_iters", ">= 1");
        }
        if let Some(name) = &self.name {
            let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
            if !ok || name.starts_with('.') {
                issues.push("name", "a non-empty file stem of letters, digits, '-', '_' or '.'");
            }
        }
        let attitude0 = match self.initial.attitude {
            None => Some(RotationMatrix::identity()),
            Some(rows) => {
                let m = Mat3::from_fn(|i, j| rows[i][j]);
                if issues.finite("initial.attitude", m.as_slice()) {
                    RotationMatrix::new(m).map_err(|e| issues.push_geom("initial.attitude", e)).ok()
                } else {
                    None
                }
            }
        };
        issues.finite("initial.omega", &self.initial.omega);
        let omega0 = Vec3::from(self.initial.omega);
        let solver = IntegratorConfig {
            dt: self.dt,
            newton_tol: self.solver.newton_tol,
            max_iters: self.solver.max_iters,
        };

        let model = match kind {
            ScenarioKind::FreeBody | ScenarioKind::IntegratorCompare => {
                for (field, present) in [
                    ("attitude_gains", self.attitude_gains.is_some()),
                    ("attitude_reference", self.attitude_reference.is_some()),
                    ("vehicle", self.vehicle.is_some()),
                    ("position_gains", self.position_gains.is_some()),
                    ("trajectory", self.trajectory.is_some()),
                    ("aero", self.aero.is_some()),
                ] {
                    if present {
                        issues.push(field, format!("absent for kind {}", kind.as_str()));
                    }
                }
                if kind == ScenarioKind::IntegratorCompare {
                    issues.unused("integrator", &self.integrator, kind);
                }
                let inertia = issues
                    .required("inertia", &self.inertia, kind)
                    .and_then(|s| inertia_of(s, "inertia", &mut issues));
                let torque = self.torque.unwrap_or_default();
                issues.finite("torque", &torque);
                match (inertia, attitude0) {
                    (Some(inertia), Some(att)) => Some(Model::RigidBody(RigidBodySetup {
                        inertia,
                        initial: RigidBodyState::new(att, omega0),
                        torque: Vec3::from(torque),
                        integrator: self.integrator.unwrap_or(IntegratorKind::Variational),
                        solver,
                    })),
                    _ => None,
                }
            }
            ScenarioKind::AttitudeTrack => {
                for (field, present) in [
                    ("torque", self.torque.is_some()),
                    ("vehicle", self.vehicle.is_some()),
                    ("position_gains", self.position_gains.is_some()),
                    ("trajectory", self.trajectory.is_some()),
                    ("aero", self.aero.is_some()),
                ] {
                    if present {
                        issues.push(field, format!("absent for kind {}", kind.as_str()));
                    }
                }
                let inertia = issues
                    .required("inertia", &self.inertia, kind)
                    .and_then(|s| inertia_of(s, "inertia", &mut issues));
                let reference = issues.required("attitude_reference", &self.attitude_reference, kind).copied();
                if let Some(r) = &reference {
                    let all: Vec<f64> = r.roll.iter().chain(&r.pitch).chain(&r.yaw).copied().collect();
                    issues.finite("attitude_reference", &all);
                }
                let gains = inertia.as_ref().and_then(|j| attitude_gains(&self.attitude_gains, j, &mut issues));
                match (inertia, attitude0, gains, reference) {
                    (Some(inertia), Some(att), Some(gains), Some(reference)) => Some(Model::Attitude(AttitudeSetup {
                        inertia,
                        initial: RigidBodyState::new(att, omega0),
                        gains,
                        reference,
                        integrator: self.integrator.unwrap_or(IntegratorKind::Rk4),
                        solver,
                    })),
                    _ => None,
                }
            }
            ScenarioKind::QuadTrack => {
                for (field, present) in [
                    ("inertia", self.inertia.is_some()),
                    ("torque", self.torque.is_some()),
                    ("attitude_reference", self.attitude_reference.is_some()),
                ] {
                    if present {
                        issues.push(field, format!("absent for kind {}", kind.as_str()));
                    }
                }
                if self.integrator == Some(IntegratorKind::Variational) {
                    issues.push("integrator", "rk4 for kind quad_track");
                }
                issues.finite("initial.position", &self.initial.position);
                issues.finite("initial.velocity", &self.initial.velocity);
                let params = issues.required("vehicle", &self.vehicle, kind).and_then(|v| {
                    let inertia = inertia_of(&v.inertia, "vehicle.inertia", &mut issues)?;
                    QuadrotorParams::new(v.mass, inertia, v.arm, v.gravity)
                        .map_err(|e| issues.push_geom("vehicle", e))
                        .ok()
                });
                let gains = match &self.position_gains {
                    None => Some(PositionGains::default()),
                    Some(g) => {
                        let a = spd_of(&g.a, "position_gains.a", &mut issues);
                        let b = spd_of(&g.b, "position_gains.b", &mut issues);
                        let c = spd_of(&g.c, "position_gains.c", &mut issues);
                        let d = spd_of(&g.d, "position_gains.d", &mut issues);
                        match (a, b, c, d) {
                            (Some(a), Some(b), Some(c), Some(d)) => Some(PositionGains { a, b, c, d }),
                            _ => None,
                        }
                    }
                };
                let att_gains = params
                    .as_ref()
                    .and_then(|p| attitude_gains(&self.attitude_gains, &p.inertia, &mut issues));
                let trajectory = issues
                    .required("trajectory", &self.trajectory, kind)
                    .and_then(|t| trajectory_of(t, &mut issues));
                let aero = match (&self.aero, &params) {
                    (Some(a), Some(p)) if a.enabled => aero_of(a, p, &mut issues).map(Some),
                    _ => Some(None),
                };
                match (params, gains, att_gains, trajectory, aero, attitude0) {
                    (Some(params), Some(gains), Some(attitude_gains), Some(trajectory), Some(aero), Some(att)) => {
                        Some(Model::Quad(QuadSetup {
                            params,
                            initial: QuadrotorState {
                                position: Vec3::from(self.initial.position),
                                velocity: Vec3::from(self.initial.velocity),
                                attitude: att,
                                omega: omega0,
                            },
                            gains,
                            attitude_gains,
                            trajectory,
                            aero,
                        }))
                    }
                    _ => None,
                }
            }
        };

        match model {
            Some(model) if issues.0.is_empty() => Ok(Setup {
                kind,
                name: self.name.clone().unwrap_or_else(|| kind.as_str().to_string()),
                dt: self.dt,
                t_final: self.t_final,
                model,
            }),
            _ => {
                if issues.0.is_empty() {
                    issues.push("scenario", "internally consistent");
                }
                Err(SimError::Validation(issues.0))
            }
        }
    }
}

fn attitude_gains(spec: &Option<AttitudeGainSpec>, inertia: &InertiaTensor, issues: &mut Issues) -> Option<AttitudeGains> {
    let Some(g) = spec else {
        return Some(AttitudeGains::from_inertia(inertia));
    };
    let p = spd_of(&g.p, "attitude_gains.p", issues);
    let f = spd_of(&g.f, "attitude_gains.f", issues);
    let s = spd_of(&g.s, "attitude_gains.s", issues);
    if !(g.k_r > 0.0 && g.k_r.is_finite()) {
        issues.push("attitude_gains.k_r", "> 0");
    }
    AttitudeGains::new(p?, f?, g.k_r, s?).map_err(|e| issues.push_geom("attitude_gains", e)).ok()
}

fn trajectory_of(spec: &TrajectorySpec, issues: &mut Issues) -> Option<TrajectoryKind> {
    match *spec {
        TrajectorySpec::Circle {
            amplitude,
            frequency,
            center,
            b1d,
        } => {
            let ok = issues.finite("trajectory", &[amplitude, frequency, center[0], center[1], center[2]]);
            let b1d = unit_heading(b1d, "trajectory.b1d", issues)?;
            ok.then_some(TrajectoryKind::Circle(CircleCoefficients {
                amplitude,
                frequency,
                center,
                b1d: b1d.into(),
            }))
        }
        TrajectorySpec::Hover { position, b1d } => {
            let ok = issues.finite("trajectory.position", &position);
            let b1d = unit_heading(b1d, "trajectory.b1d", issues)?;
            ok.then_some(TrajectoryKind::Hover {
                position: Vec3::from(position),
                b1d,
            })
        }
    }
}

fn aero_of(spec: &AeroSpec, params: &QuadrotorParams, issues: &mut Issues) -> Option<VehicleAero> {
    let r = &spec.rotor;
    let geometry = RotorGeometry::new(r.blades, r.chord, r.radius, r.lift_slope, r.theta0, r.theta_tw, r.cd_bar)
        .map_err(|e| issues.push_geom("aero.rotor", e))
        .ok()?;
    if !(spec.rho > 0.0 && spec.rho.is_finite()) {
        issues.push("aero.rho", "> 0");
        return None;
    }
    if r.radius >= params.arm {
        issues.push("aero.rotor.radius", "smaller than vehicle.arm");
    }
    let inflow = match spec.inflow {
        InflowSpec::Coupled => InflowModel::Coupled,
        InflowSpec::Static => InflowModel::Static,
    };
    VehicleAero::new(geometry, spec.rho, params.arm, params.weight(), inflow)
        .map_err(|e| issues.push_geom("aero", e))
        .ok()
}
