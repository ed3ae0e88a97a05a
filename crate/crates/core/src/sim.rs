//! Scenario execution: time series, summary metrics and output files.

use std::cell::RefCell;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attitude::{attitude_terms, AttitudeGains};
use crate::error::GeomError;
use crate::quadrotor::{translational_lyapunov, TrackingController, TrajectoryReference};
use crate::reference::{circle_reference, euler_321_reference, EulerCoefficients};
use crate::rigid_body::{
    kinetic_energy, rk4_attitude_step, rk4_quadrotor_step, spatial_momentum, BodyWrench, InertiaTensor, RigidBodyState,
};
use crate::scenario::{
    AttitudeSetup, IntegratorKind, Model, QuadSetup, RigidBodySetup, Scenario, ScenarioKind, Setup, SimError,
    TrajectoryKind, ValidationIssue,
};
use crate::so3::{attitude_distance, polar_project, RotationMatrix, Vec3};
use crate::variational::{simulate, step_count, IntegratorConfig};

/// Fraction of the initial error defining the settling band.
pub const SETTLING_FRACTION: f64 = 0.05;

/// Column-oriented record of a run: one row per step, `t` first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TimeSeries {
    fn with_columns(columns: Vec<String>, capacity: usize) -> Self {
        Self {
            columns,
            rows: Vec::with_capacity(capacity),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All values of the named column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Summary of an integrator-comparison run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMetrics {
    pub rk4_energy_drift_max_rel: f64,
    pub rk4_energy_drift_final_rel: f64,
    pub rk4_momentum_drift_max: f64,
    pub rk4_orthogonality_defect_max: f64,
    /// `|H_rk4(T) − H(0)| / max_k |H_vi(k) − H(0)|`
    pub rk4_to_variational_drift_ratio: f64,
    /// Rotation angle between the two final attitudes (rad).
    pub final_attitude_difference: f64,
}

/// Scalar summary of a run. Fields that do not apply to the scenario kind
/// are `null` in the JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub kind: ScenarioKind,
    pub integrator: IntegratorKind,
    pub steps: usize,
    pub dt: f64,
    pub t_final: f64,
    pub energy_drift_max_rel: Option<f64>,
    pub energy_drift_final_rel: Option<f64>,
    /// Least-squares slope of kinetic energy against step index.
    pub energy_slope_per_step: Option<f64>,
    pub momentum_drift_max: Option<f64>,
    pub orthogonality_defect_max: f64,
    /// First time after which the tracking error stays within 5% of its
    /// initial value; `null` when that never happens.
    pub settling_time_5pct: Option<f64>,
    pub settled: Option<bool>,
    /// Largest tracking error over the second half of the run.
    pub steady_state_error: Option<f64>,
    /// Largest per-axis position error over the second half of the run.
    pub steady_state_error_xyz: Option<[f64; 3]>,
    /// Largest one-step increase of the attitude Lyapunov function.
    pub lyapunov_increase_max: Option<f64>,
    /// Largest one-step increase of the translational Lyapunov function over
    /// steps where the attitude error is below 0.01.
    pub position_lyapunov_increase_max: Option<f64>,
    pub newton_iters_mean: Option<f64>,
    pub newton_residual_max: Option<f64>,
    pub negative_thrust_steps: Option<usize>,
    pub gimbal_warnings: Option<usize>,
    pub aero_enabled: Option<bool>,
    pub comparison: Option<ComparisonMetrics>,
}

impl MetricsSummary {
    fn empty(setup: &Setup, integrator: IntegratorKind, steps: usize) -> Self {
        Self {
            kind: setup.kind,
            integrator,
            steps,
            dt: setup.dt,
            t_final: setup.t_final,
            energy_drift_max_rel: None,
            energy_drift_final_rel: None,
            energy_slope_per_step: None,
            momentum_drift_max: None,
            orthogonality_defect_max: 0.0,
            settling_time_5pct: None,
            settled: None,
            steady_state_error: None,
            steady_state_error_xyz: None,
            lyapunov_increase_max: None,
            position_lyapunov_increase_max: None,
            newton_iters_mean: None,
            newton_residual_max: None,
            negative_thrust_steps: None,
            gimbal_warnings: None,
            aero_enabled: None,
            comparison: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub metrics: MetricsSummary,
}

/// Command-line overrides applied to a parsed scenario before validation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub aero: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) -> Result<(), SimError> {
        if let Some(dt) = self.dt {
            scenario.dt = dt;
        }
        if let Some(t) = self.t_final {
            scenario.t_final = t;
        }
        match (self.aero, scenario.aero.as_mut()) {
            (Some(on), Some(a)) => a.enabled = on,
            (Some(true), None) => {
                return Err(SimError::Validation(vec![ValidationIssue {
                    field: "aero".into(),
                    constraint: "present in the scenario when aerodynamics are switched on".into(),
                }]))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Runs a validated scenario.
pub fn run(setup: &Setup) -> Result<RunOutput, SimError> {
    match (&setup.model, setup.kind) {
        (Model::RigidBody(rb), ScenarioKind::IntegratorCompare) => run_compare(setup, rb),
        (Model::RigidBody(rb), _) => run_free_body(setup, rb),
        (Model::Attitude(a), _) => run_attitude(setup, a),
        (Model::Quad(q), _) => run_quad(setup, q),
    }
}

/// Runs the integrator comparison on a rigid-body scenario, whatever its
/// declared kind.
pub fn run_comparison(setup: &Setup) -> Result<RunOutput, SimError> {
    match &setup.model {
        Model::RigidBody(rb) => {
            let s = Setup {
                kind: ScenarioKind::IntegratorCompare,
                ..setup.clone()
            };
            run_compare(&s, rb)
        }
        _ => Err(SimError::Validation(vec![ValidationIssue {
            field: "kind".into(),
            constraint: "free_body or integrator_compare for an integrator comparison".into(),
        }])),
    }
}

fn names(prefix: &str, parts: &[&str]) -> Vec<String> {
    parts.iter().map(|p| format!("{prefix}{p}")).collect()
}

fn rotation_columns(prefix: &str) -> Vec<String> {
    names(prefix, &["11", "12", "13", "21", "22", "23", "31", "32", "33"])
}

fn push_rotation(row: &mut Vec<f64>, r: &RotationMatrix) {
    let m = r.matrix();
    for i in 0..3 {
        for j in 0..3 {
            row.push(m[(i, j)]);
        }
    }
}

fn push_vec(row: &mut Vec<f64>, v: &Vec3) {
    row.extend_from_slice(v.as_slice());
}

fn relative_drift(values: &[f64]) -> (f64, f64) {
    let h0 = values[0];
    let scale = if h0.abs() > 0.0 { h0.abs() } else { 1.0 };
    let max = values.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max) / scale;
    let last = (values[values.len() - 1] - h0).abs() / scale;
    (max, last)
}

/// Least-squares slope of `values` against their index.
pub fn regression_slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let k_mean = (n - 1.0) / 2.0;
    let v_mean = values.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, v) in values.iter().enumerate() {
        let dk = k as f64 - k_mean;
        num += dk * (v - v_mean);
        den += dk * dk;
    }
    num / den
}

/// First time after which `signal` stays within `fraction` of its initial
/// value, or `None` when it is still outside at the end.
pub fn settling_time(times: &[f64], signal: &[f64], fraction: f64) -> Option<f64> {
    let band = fraction * signal[0];
    match signal.iter().rposition(|&s| s > band) {
        None => Some(times[0]),
        Some(i) if i + 1 < signal.len() => Some(times[i + 1]),
        Some(_) => None,
    }
}

fn steady_window(times: &[f64], t_final: f64) -> usize {
    times.iter().position(|&t| t >= 0.5 * t_final - 1e-12).unwrap_or(times.len() - 1)
}

fn free_body_columns(prefix: &str) -> Vec<String> {
    let mut c = rotation_columns(&format!("{prefix}R"));
    c.extend(names(prefix, &["omega_x", "omega_y", "omega_z", "H", "Pi_x", "Pi_y", "Pi_z", "orth_defect"]));
    c
}

fn push_free_body(row: &mut Vec<f64>, s: &RigidBodyState, inertia: &InertiaTensor) {
    push_rotation(row, &s.attitude);
    push_vec(row, &s.omega);
    row.push(kinetic_energy(s, inertia));
    push_vec(row, &spatial_momentum(s, inertia));
    row.push(s.attitude.orthogonality_defect());
}

struct RigidRun {
    states: Vec<RigidBodyState>,
    newton: Option<Vec<(usize, f64)>>,
}

fn integrate_rigid(setup: &Setup, rb: &RigidBodySetup, integrator: IntegratorKind) -> Result<RigidRun, SimError> {
    let torque = rb.torque;
    match integrator {
        IntegratorKind::Variational => {
            let cfg = IntegratorConfig { dt: setup.dt, ..rb.solver };
            let traj = simulate(&rb.initial, &rb.inertia, |_, _, _| torque, &cfg, setup.t_final)?;
            Ok(RigidRun {
                states: traj.states,
                newton: Some(traj.steps.iter().map(|s| (s.newton_iters, s.residual)).collect()),
            })
        }
        IntegratorKind::Rk4 => {
            let n = step_count(setup.t_final, setup.dt);
            let mut states = Vec::with_capacity(n + 1);
            let mut s = rb.initial;
            states.push(s);
            for k in 0..n {
                let t = k as f64 * setup.dt;
                s = rk4_attitude_step(&s, &rb.inertia, |_, _| torque, t, setup.dt).map_err(|e| e.at_step(k, t))?;
                states.push(s);
            }
            Ok(RigidRun { states, newton: None })
        }
    }
}

fn conserved_metrics(states: &[RigidBodyState], inertia: &InertiaTensor) -> (f64, f64, f64, f64) {
    let energies: Vec<f64> = states.iter().map(|s| kinetic_energy(s, inertia)).collect();
    let (max, last) = relative_drift(&energies);
    let p0 = spatial_momentum(&states[0], inertia);
    let mom = states
        .iter()
        .map(|s| (spatial_momentum(s, inertia) - p0).norm())
        .fold(0.0, f64::max);
    (max, last, regression_slope(&energies), mom)
}

fn orth_max(states: &[RigidBodyState]) -> f64 {
    states.iter().map(|s| s.attitude.orthogonality_defect()).fold(0.0, f64::max)
}

fn newton_summary(m: &mut MetricsSummary, newton: &Option<Vec<(usize, f64)>>) {
    if let Some(n) = newton {
        if !n.is_empty() {
            m.newton_iters_mean = Some(n.iter().map(|x| x.0 as f64).sum::<f64>() / n.len() as f64);
            m.newton_residual_max = Some(n.iter().map(|x| x.1).fold(0.0, f64::max));
        }
    }
}

fn run_free_body(setup: &Setup, rb: &RigidBodySetup) -> Result<RunOutput, SimError> {
    let run = integrate_rigid(setup, rb, rb.integrator)?;
    let mut columns = vec!["t".to_string()];
    columns.extend(free_body_columns(""));
    columns.extend(names("", &["newton_iters", "newton_residual"]));
    let mut series = TimeSeries::with_columns(columns, run.states.len());
    for (k, s) in run.states.iter().enumerate() {
        let mut row = vec![k as f64 * setup.dt];
        push_free_body(&mut row, s, &rb.inertia);
        let (it, res) = match (&run.newton, k) {
            (Some(n), k) if k > 0 => (n[k - 1].0 as f64, n[k - 1].1),
            _ => (0.0, 0.0),
        };
        row.push(it);
        row.push(res);
        series.rows.push(row);
    }

    let mut m = MetricsSummary::empty(setup, rb.integrator, run.states.len() - 1);
    m.orthogonality_defect_max = orth_max(&run.states);
    if rb.torque == Vec3::zeros() {
        let (max, last, slope, mom) = conserved_metrics(&run.states, &rb.inertia);
        m.energy_drift_max_rel = Some(max);
        m.energy_drift_final_rel = Some(last);
        m.energy_slope_per_step = Some(slope);
        m.momentum_drift_max = Some(mom);
    }
    newton_summary(&mut m, &run.newton);
    Ok(RunOutput { series, metrics: m })
}

fn run_compare(setup: &Setup, rb: &RigidBodySetup) -> Result<RunOutput, SimError> {
    let vi = integrate_rigid(setup, rb, IntegratorKind::Variational)?;
    let rk = integrate_rigid(setup, rb, IntegratorKind::Rk4)?;

    let mut columns = vec!["t".to_string()];
    columns.extend(free_body_columns("vi_"));
    columns.extend(free_body_columns("rk4_"));
    columns.extend(names("", &["attitude_difference", "newton_iters"]));
    let mut series = TimeSeries::with_columns(columns, vi.states.len());
    for (k, (a, b)) in vi.states.iter().zip(&rk.states).enumerate() {
        let mut row = vec![k as f64 * setup.dt];
        push_free_body(&mut row, a, &rb.inertia);
        push_free_body(&mut row, b, &rb.inertia);
        row.push(attitude_distance(&a.attitude, &b.attitude));
        row.push(match &vi.newton {
            Some(n) if k > 0 => n[k - 1].0 as f64,
            _ => 0.0,
        });
        series.rows.push(row);
    }

    let mut m = MetricsSummary::empty(setup, IntegratorKind::Variational, vi.states.len() - 1);
    m.orthogonality_defect_max = orth_max(&vi.states);
    let (max, last, slope, mom) = conserved_metrics(&vi.states, &rb.inertia);
    let (rmax, rlast, _, rmom) = conserved_metrics(&rk.states, &rb.inertia);
    if rb.torque == Vec3::zeros() {
        m.energy_drift_max_rel = Some(max);
        m.energy_drift_final_rel = Some(last);
        m.energy_slope_per_step = Some(slope);
        m.momentum_drift_max = Some(mom);
    }
    newton_summary(&mut m, &vi.newton);
    m.comparison = Some(ComparisonMetrics {
        rk4_energy_drift_max_rel: rmax,
        rk4_energy_drift_final_rel: rlast,
        rk4_momentum_drift_max: rmom,
        rk4_orthogonality_defect_max: orth_max(&rk.states),
        rk4_to_variational_drift_ratio: if max > 0.0 { rlast / max } else { f64::INFINITY },
        final_attitude_difference: attitude_distance(
            &vi.states[vi.states.len() - 1].attitude,
            &rk.states[rk.states.len() - 1].attitude,
        ),
    });
    Ok(RunOutput { series, metrics: m })
}

fn control(
    s: &RigidBodyState,
    t: f64,
    reference: &EulerCoefficients,
    inertia: &InertiaTensor,
    gains: &AttitudeGains,
) -> Result<Vec3, GeomError> {
    let r = euler_321_reference(t, reference).reference;
    // intermediate RK4 stages drift off SO(3); the controller sees the
    // nearest rotation
    let att = polar_project(s.attitude.matrix())?;
    attitude_terms(&att, &s.omega, &r, inertia, gains).map(|x| x.torque)
}

fn run_attitude(setup: &Setup, a: &AttitudeSetup) -> Result<RunOutput, SimError> {
    let n = step_count(setup.t_final, setup.dt);
    let mut states = Vec::with_capacity(n + 1);
    let mut newton = Vec::new();
    let mut s = a.initial;
    states.push(s);
    let failure: RefCell<Option<GeomError>> = RefCell::new(None);
    let torque_at = |t: f64, st: &RigidBodyState| -> Vec3 {
        match control(st, t, &a.reference, &a.inertia, &a.gains) {
            Ok(q) => q,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Vec3::zeros()
            }
        }
    };
    for k in 0..n {
        let t = k as f64 * setup.dt;
        let next = match a.integrator {
            IntegratorKind::Rk4 => rk4_attitude_step(&s, &a.inertia, |tau, st| torque_at(tau, st), t, setup.dt),
            IntegratorKind::Variational => {
                let cfg = IntegratorConfig { dt: setup.dt, ..a.solver };
                let mut moment = |tau: f64, att: &RotationMatrix, w: &Vec3| torque_at(tau, &RigidBodyState::new(*att, *w));
                crate::variational::vi_step(&s.attitude, &s.omega, t, &mut moment, &a.inertia, &cfg).map(|r| {
                    newton.push((r.newton_iters, r.residual));
                    RigidBodyState::new(r.t_next, r.omega_next)
                })
            }
        };
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e.at_step(k, t).into());
        }
        s = next.map_err(|e| e.at_step(k, t))?;
        states.push(s);
    }

    let mut columns = vec!["t".to_string()];
    columns.extend(rotation_columns("R"));
    columns.extend(rotation_columns("Rd"));
    columns.extend(names(
        "",
        &[
            "omega_x", "omega_y", "omega_z", "psi", "eR_x", "eR_y", "eR_z", "eR_norm", "eOmega_x", "eOmega_y",
            "eOmega_z", "eOmega_norm", "q_x", "q_y", "q_z", "V_a", "H", "orth_defect", "newton_iters",
            "gimbal_warning",
        ],
    ));
    let mut series = TimeSeries::with_columns(columns, states.len());
    let mut psi = Vec::with_capacity(states.len());
    let mut lyap = Vec::with_capacity(states.len());
    let mut gimbal = 0;
    let mut times = Vec::with_capacity(states.len());
    for (k, st) in states.iter().enumerate() {
        let t = k as f64 * setup.dt;
        let sample = euler_321_reference(t, &a.reference);
        let terms = attitude_terms(&st.attitude, &st.omega, &sample.reference, &a.inertia, &a.gains)
            .map_err(|e| e.at_step(k, t))?;
        let v = terms.lyapunov(&st.omega, &a.gains);
        gimbal += sample.gimbal_warning as usize;
        let mut row = vec![t];
        push_rotation(&mut row, &st.attitude);
        push_rotation(&mut row, &sample.reference.r_d);
        push_vec(&mut row, &st.omega);
        row.push(terms.psi);
        push_vec(&mut row, &terms.e_r);
        row.push(terms.e_r.norm());
        push_vec(&mut row, &terms.e_omega);
        row.push(terms.e_omega.norm());
        push_vec(&mut row, &terms.torque);
        row.push(v);
        row.push(kinetic_energy(st, &a.inertia));
        row.push(st.attitude.orthogonality_defect());
        row.push(if k > 0 && !newton.is_empty() { newton[k - 1].0 as f64 } else { 0.0 });
        row.push(sample.gimbal_warning as u8 as f64);
        series.rows.push(row);
        psi.push(terms.psi);
        lyap.push(v);
        times.push(t);
    }

    let mut m = MetricsSummary::empty(setup, a.integrator, n);
    m.orthogonality_defect_max = orth_max(&states);
    m.settling_time_5pct = settling_time(&times, &psi, SETTLING_FRACTION);
    m.settled = Some(m.settling_time_5pct.is_some());
    let w = steady_window(&times, setup.t_final);
    m.steady_state_error = Some(psi[w..].iter().copied().fold(0.0, f64::max));
    m.lyapunov_increase_max = lyap.windows(2).map(|p| p[1] - p[0]).reduce(f64::max);
    m.gimbal_warnings = Some(gimbal);
    if !newton.is_empty() {
        newton_summary(&mut m, &Some(newton));
    }
    Ok(RunOutput { series, metrics: m })
}

fn trajectory_at(kind: &TrajectoryKind, t: f64) -> TrajectoryReference {
    match kind {
        TrajectoryKind::Circle(c) => circle_reference(t, c),
        TrajectoryKind::Hover { position, b1d } => TrajectoryReference {
            r_d: *position,
            v_d: Vec3::zeros(),
            a_d: Vec3::zeros(),
            b_1d: *b1d,
        },
    }
}

fn run_quad(setup: &Setup, q: &QuadSetup) -> Result<RunOutput, SimError> {
    let n = step_count(setup.t_final, setup.dt);
    let mut columns = vec!["t".to_string()];
    columns.extend(names("", &["x", "y", "z", "vx", "vy", "vz"]));
    columns.extend(rotation_columns("R"));
    columns.extend(names(
        "",
        &[
            "omega_x", "omega_y", "omega_z", "xd", "yd", "zd", "er_x", "er_y", "er_z", "er_norm", "ev_norm",
            "psi", "eR_norm", "eOmega_norm", "f", "q_x", "q_y", "q_z", "V_pos", "negative_thrust",
        ],
    ));
    if q.aero.is_some() {
        columns.extend(names(
            "",
            &[
                "rotor_speed_0", "rotor_speed_1", "rotor_speed_2", "rotor_speed_3", "aero_fx", "aero_fy",
                "aero_fz", "aero_mx", "aero_my", "aero_mz", "inflow_iters",
            ],
        ));
    }
    let mut series = TimeSeries::with_columns(columns, n + 1);
    let mut ctrl = TrackingController::new(q.params, q.gains, q.attitude_gains);
    let mut s = q.initial;
    let mut times = Vec::with_capacity(n + 1);
    let mut er = Vec::with_capacity(n + 1);
    let mut er_xyz = Vec::with_capacity(n + 1);
    let mut vpos = Vec::with_capacity(n + 1);
    let mut psi = Vec::with_capacity(n + 1);
    let mut negative = 0;
    let mut orth: f64 = 0.0;

    for k in 0..=n {
        let t = k as f64 * setup.dt;
        let reference = trajectory_at(&q.trajectory, t);
        let out = ctrl.update(t, &s, &reference).map_err(|e| e.at_step(k, t))?;
        let aero = match &q.aero {
            Some(a) => Some(a.sample(&s, out.thrust, &out.torque).map_err(|e| e.at_step(k, t))?),
            None => None,
        };
        let d = &out.diagnostics;
        let v = translational_lyapunov(&s.position, &s.velocity, &reference, &q.gains);

        let mut row = vec![t];
        push_vec(&mut row, &s.position);
        push_vec(&mut row, &s.velocity);
        push_rotation(&mut row, &s.attitude);
        push_vec(&mut row, &s.omega);
        push_vec(&mut row, &reference.r_d);
        push_vec(&mut row, &d.e_r);
        row.push(d.e_r.norm());
        row.push(d.e_v.norm());
        row.push(d.psi);
        row.push(d.e_att.norm());
        row.push(d.e_omega.norm());
        row.push(out.thrust);
        push_vec(&mut row, &out.torque);
        row.push(v);
        row.push(d.negative_thrust as u8 as f64);
        if let Some(a) = &aero {
            row.extend_from_slice(&a.rotor_speeds);
            push_vec(&mut row, &a.extra.force_body);
            push_vec(&mut row, &a.extra.moment_body);
            row.push(a.inflow_iters as f64);
        }
        series.rows.push(row);

        times.push(t);
        er.push(d.e_r.norm());
        er_xyz.push(d.e_r);
        vpos.push(v);
        psi.push(d.psi);
        negative += d.negative_thrust as usize;
        orth = orth.max(s.attitude.orthogonality_defect());

        if k < n {
            let extra = aero.map(|a| a.extra).unwrap_or_else(BodyWrench::zero);
            let (f, tq) = (out.thrust, out.torque);
            s = rk4_quadrotor_step(&s, &q.params, |_, _| (f, tq, extra), t, setup.dt).map_err(|e| e.at_step(k, t))?;
        }
    }

    let mut m = MetricsSummary::empty(setup, IntegratorKind::Rk4, n);
    m.orthogonality_defect_max = orth;
    m.settling_time_5pct = settling_time(&times, &er, SETTLING_FRACTION);
    m.settled = Some(m.settling_time_5pct.is_some());
    let w = steady_window(&times, setup.t_final);
    m.steady_state_error = Some(er[w..].iter().copied().fold(0.0, f64::max));
    let mut xyz = [0.0f64; 3];
    for e in &er_xyz[w..] {
        for i in 0..3 {
            xyz[i] = xyz[i].max(e[i].abs());
        }
    }
    m.steady_state_error_xyz = Some(xyz);
    m.position_lyapunov_increase_max = (0..n)
        .filter(|&k| psi[k] < 0.01)
        .map(|k| vpos[k + 1] - vpos[k])
        .reduce(f64::max);
    m.negative_thrust_steps = Some(negative);
    m.aero_enabled = Some(q.aero.is_some());
    Ok(RunOutput { series, metrics: m })
}

/// Where a run's files go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub series: PathBuf,
    pub metrics: PathBuf,
}

impl OutputPaths {
    /// `<dir>/<name>.csv` and `<dir>/<name>.metrics.json`.
    pub fn in_dir(dir: &Path, name: &str) -> Self {
        Self {
            series: dir.join(format!("{name}.csv")),
            metrics: dir.join(format!("{name}.metrics.json")),
        }
    }
}

/// Writes the series as CSV with shortest round-trip number formatting.
pub fn write_series<W: std::io::Write>(series: &TimeSeries, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&series.columns)?;
    for row in &series.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn metrics_json(metrics: &MetricsSummary) -> String {
    let mut s = serde_json::to_string_pretty(metrics).expect("metrics serialise");
    s.push('\n');
    s
}

/// Writes both output files, creating parent directories as needed.
pub fn write_outputs(series: &TimeSeries, metrics: &MetricsSummary, paths: &OutputPaths) -> Result<(), SimError> {
    for p in [&paths.series, &paths.metrics] {
        if let Some(parent) = p.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
    }
    let mut buf = Vec::new();
    write_series(series, &mut buf)?;
    fs::write(&paths.series, buf)?;
    fs::write(&paths.metrics, metrics_json(metrics))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::load_scenario;

    fn run_text(text: &str) -> RunOutput {
        let (_, setup) = load_scenario(text.as_bytes()).unwrap();
        run(&setup).unwrap()
    }

    #[test]
    fn settling_time_rules() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(settling_time(&t, &[1.0, 0.5, 0.01, 0.02], 0.05), Some(2.0));
        assert_eq!(settling_time(&t, &[1.0, 0.01, 0.2, 0.01], 0.05), Some(3.0));
        assert_eq!(settling_time(&t, &[1.0, 0.5, 0.5, 0.5], 0.05), None);
        assert_eq!(settling_time(&t, &[0.0, 0.0, 0.0, 0.0], 0.05), Some(0.0));
    }

    #[test]
    fn slope_of_line() {
        let v: Vec<f64> = (0..10).map(|k| 2.0 + 0.5 * k as f64).collect();
        assert!((regression_slope(&v) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn free_body_series_shape() {
        let out = run_text(r#"{"kind": "free_body", "dt": 0.01, "t_final": 0.1, "inertia": [3, 2, 1], "initial": {"omega": [1, 1, 1]}}"#);
        assert_eq!(out.series.rows.len(), 11);
        assert_eq!(out.series.columns[0], "t");
        for c in ["H", "Pi_x", "orth_defect", "newton_iters"] {
            assert!(out.series.column_index(c).is_some(), "{c}");
        }
        assert!(out.metrics.energy_drift_max_rel.is_some());
        assert!(out.metrics.settling_time_5pct.is_none());
        assert_eq!(out.metrics.steps, 10);
    }

    #[test]
    fn empty_series_writes_header_only() {
        let s = TimeSeries {
            columns: vec!["t".into(), "x".into()],
            rows: vec![],
        };
        let mut buf = Vec::new();
        write_series(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x\n");
    }

    #[test]
    fn csv_round_trips_exactly() {
        let s = TimeSeries {
            columns: vec!["a".into(), "b".into(), "c".into()],
            rows: vec![vec![0.1, 1.0 / 3.0, -2.5e-300], vec![1e21, f64::MIN_POSITIVE, 123_456_789.123_456_79]],
        };
        let mut buf = Vec::new();
        write_series(&s, &mut buf).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<Vec<f64>> = r.deserialize().map(|x| x.unwrap()).collect();
        assert_eq!(rows, s.rows);
    }

    #[test]
    fn comparison_needs_rigid_body() {
        let (_, setup) = load_scenario(
            br#"{"kind": "quad_track", "dt": 0.01, "t_final": 0.1,
                "vehicle": {"mass": 1, "inertia": [0.1, 0.1, 0.1], "arm": 0.2},
                "trajectory": {"type": "hover", "position": [0, 0, 0]}}"#,
        )
        .unwrap();
        assert!(matches!(run_comparison(&setup), Err(SimError::Validation(_))));
    }

    #[test]
    fn hover_quad_stays_put() {
        let out = run_text(
            r#"{"kind": "quad_track", "dt": 0.01, "t_final": 1,
                "vehicle": {"mass": 1, "inertia": [0.1, 0.1, 0.1], "arm": 0.2},
                "trajectory": {"type": "hover", "position": [0, 0, 0]}}"#,
        );
        assert!(out.metrics.steady_state_error.unwrap() < 1e-12);
        assert_eq!(out.metrics.negative_thrust_steps, Some(0));
    }

    #[test]
    fn overrides_apply() {
        let mut s = crate::scenario::parse_scenario(
            br#"{"kind": "free_body", "dt": 0.01, "t_final": 1, "inertia": [3, 2, 1]}"#,
        )
        .unwrap();
        Overrides { dt: Some(0.02), t_final: Some(2.0), aero: None }.apply(&mut s).unwrap();
        assert_eq!((s.dt, s.t_final), (0.02, 2.0));
        assert!(Overrides { aero: Some(true), ..Default::default() }.apply(&mut s).is_err());
        assert!(Overrides { aero: Some(false), ..Default::default() }.apply(&mut s).is_ok());
    }
}
