//! Position tracking for a quadrotor by translational backstepping.
//!
//! The outer loop turns a position error into a desired inertial force,
//! whose direction fixes the commanded body z-axis and whose projection on
//! the current body z-axis is the collective thrust. The commanded attitude is
//! then tracked by the attitude controller.

use crate::attitude::{attitude_terms, check_spd, AttitudeGains, AttitudeReference};
use crate::error::{GeomError, Result};
use crate::rigid_body::{QuadrotorParams, QuadrotorState};
use crate::so3::{log_so3, Mat3, RotationMatrix, Vec3};

/// Smallest admissible commanded force norm.
pub const MIN_FORCE: f64 = 1e-8;
/// Smallest admissible angle between heading hint and thrust axis.
pub const MIN_HEADING_ANGLE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionGains {
    /// Weight on position error in the Lyapunov function.
    pub a: Mat3,
    /// Position error feedback in the velocity target.
    pub b: Mat3,
    /// Weight on velocity error in the Lyapunov function.
    pub c: Mat3,
    /// Velocity error feedback in the force command.
    pub d: Mat3,
}

impl PositionGains {
    pub fn new(a: Mat3, b: Mat3, c: Mat3, d: Mat3) -> Result<Self> {
        check_spd(&a, "A")?;
        check_spd(&b, "B")?;
        check_spd(&c, "C")?;
        check_spd(&d, "D")?;
        Ok(Self { a, b, c, d })
    }
}

impl Default for PositionGains {
    fn default() -> Self {
        Self {
            a: Mat3::identity(),
            b: Mat3::identity() * 2.0,
            c: Mat3::identity(),
            d: Mat3::identity() * 2.0,
        }
    }
}

/// Desired translational trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryReference {
    pub r_d: Vec3,
    pub v_d: Vec3,
    pub a_d: Vec3,
    /// Desired heading of the body x-axis (unit).
    pub b_1d: Vec3,
}

impl TrajectoryReference {
    pub fn new(r_d: Vec3, v_d: Vec3, a_d: Vec3, b_1d: Vec3) -> Result<Self> {
        if (b_1d.norm() - 1.0).abs() > 1e-9 {
            return Err(GeomError::InvalidParameter {
                field: "b_1d",
                constraint: "a unit vector",
            });
        }
        Ok(Self { r_d, v_d, a_d, b_1d })
    }

    pub fn hover(r_d: Vec3) -> Self {
        Self {
            r_d,
            v_d: Vec3::zeros(),
            a_d: Vec3::zeros(),
            b_1d: Vec3::x(),
        }
    }
}

/// `v_tar = v_d − B(r − r_d)`
pub fn velocity_target(r: &Vec3, reference: &TrajectoryReference, gains: &PositionGains) -> Vec3 {
    reference.v_d - gains.b * (r - reference.r_d)
}

/// `v̇_tar = a_d − B(v − v_d)`
pub fn velocity_target_rate(v: &Vec3, reference: &TrajectoryReference, gains: &PositionGains) -> Vec3 {
    reference.a_d - gains.b * (v - reference.v_d)
}

/// Desired inertial force `m v̇_tar − m G − D(v − v_tar)`.
pub fn force_command(
    r: &Vec3,
    v: &Vec3,
    reference: &TrajectoryReference,
    params: &QuadrotorParams,
    gains: &PositionGains,
) -> Vec3 {
    let v_tar = velocity_target(r, reference, gains);
    let vdot_tar = velocity_target_rate(v, reference, gains);
    params.mass * (vdot_tar - params.gravity_vector()) - gains.d * (v - v_tar)
}

/// Collective thrust: the commanded force projected on the body z-axis.
pub fn thrust_scalar(force_cmd: &Vec3, r: &RotationMatrix) -> f64 {
    force_cmd.dot(&r.column(2))
}

/// Attitude whose z-axis is along `force_cmd` and whose x-axis is the
/// projection of `b_1d` onto the plane normal to it.
pub fn commanded_attitude(force_cmd: &Vec3, b_1d: &Vec3) -> Result<RotationMatrix> {
    let norm = force_cmd.norm();
    if !(norm > MIN_FORCE) {
        return Err(GeomError::ZeroForce { norm });
    }
    let b3 = force_cmd / norm;
    let hint = b_1d.normalize();
    let angle = b3.cross(&hint).norm().atan2(b3.dot(&hint));
    if angle < MIN_HEADING_ANGLE || std::f64::consts::PI - angle < MIN_HEADING_ANGLE {
        return Err(GeomError::DegenerateHeading { angle });
    }
    let raw = -b3.cross(&b3.cross(&hint));
    let b1 = raw / raw.norm();
    let b2 = b3.cross(&b1);
    Ok(RotationMatrix::from_matrix_unchecked(Mat3::from_columns(&[b1, b2, b3])))
}

/// `½ e_rᵀA e_r + ½ (v − v_tar)ᵀC (v − v_tar)`
pub fn translational_lyapunov(
    r: &Vec3,
    v: &Vec3,
    reference: &TrajectoryReference,
    gains: &PositionGains,
) -> f64 {
    let e_r = r - reference.r_d;
    let e_v = v - velocity_target(r, reference, gains);
    0.5 * e_r.dot(&(gains.a * e_r)) + 0.5 * e_v.dot(&(gains.c * e_v))
}

/// Per-tick outputs of the tracking loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingDiagnostics {
    pub e_r: Vec3,
    /// `v − v_tar`
    pub e_v: Vec3,
    pub psi: f64,
    pub e_att: Vec3,
    pub e_omega: Vec3,
    pub commanded: RotationMatrix,
    pub force_cmd: Vec3,
    /// Set when the thrust came out negative (not clamped).
    pub negative_thrust: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingOutput {
    pub thrust: f64,
    pub torque: Vec3,
    pub diagnostics: TrackingDiagnostics,
}

/// Stateless single evaluation of the full loop with a given commanded
/// attitude rate.
pub fn tracking_step(
    state: &QuadrotorState,
    reference: &TrajectoryReference,
    params: &QuadrotorParams,
    gains: &PositionGains,
    att_gains: &AttitudeGains,
    commanded_rate: (Vec3, Vec3),
) -> Result<TrackingOutput> {
    let force_cmd = force_command(&state.position, &state.velocity, reference, params, gains);
    let r_c = commanded_attitude(&force_cmd, &reference.b_1d)?;
    let thrust = thrust_scalar(&force_cmd, &state.attitude);
    let att_ref = AttitudeReference {
        r_d: r_c,
        omega_d: commanded_rate.0,
        omega_d_dot: commanded_rate.1,
    };
    let terms = attitude_terms(&state.attitude, &state.omega, &att_ref, &params.inertia, att_gains)?;
    Ok(TrackingOutput {
        thrust,
        torque: terms.torque,
        diagnostics: TrackingDiagnostics {
            e_r: state.position - reference.r_d,
            e_v: state.velocity - velocity_target(&state.position, reference, gains),
            psi: terms.psi,
            e_att: terms.e_r,
            e_omega: terms.e_omega,
            commanded: r_c,
            force_cmd,
            negative_thrust: thrust < 0.0,
        },
    })
}

/// Tracking loop that differentiates the commanded attitude across ticks.
///
/// The commanded rate comes from backward differences of `R_c`, so the loop
/// is causal: `Ω_c(t) = log(R_c(t−h)ᵀ R_c(t)) / h` and
/// `Ω̇_c(t) = (Ω_c(t) − Ω_c(t−h)) / h`. Both are zero on the first tick.
#[derive(Debug, Clone)]
pub struct TrackingController {
    pub params: QuadrotorParams,
    pub gains: PositionGains,
    pub att_gains: AttitudeGains,
    prev: Option<(f64, RotationMatrix, Vec3)>,
}

impl TrackingController {
    pub fn new(params: QuadrotorParams, gains: PositionGains, att_gains: AttitudeGains) -> Self {
        Self {
            params,
            gains,
            att_gains,
            prev: None,
        }
    }

    pub fn reset(&mut self) {
        self.prev = None;
    }

    pub fn update(&mut self, t: f64, state: &QuadrotorState, reference: &TrajectoryReference) -> Result<TrackingOutput> {
        let force_cmd = force_command(&state.position, &state.velocity, reference, &self.params, &self.gains);
        let r_c = commanded_attitude(&force_cmd, &reference.b_1d)?;
        let (w_c, w_c_dot) = match self.prev {
            Some((t_prev, r_prev, w_prev)) if t > t_prev => {
                let h = t - t_prev;
                let w = log_so3(&(r_prev.transpose() * r_c)) / h;
                (w, (w - w_prev) / h)
            }
            _ => (Vec3::zeros(), Vec3::zeros()),
        };
        self.prev = Some((t, r_c, w_c));
        tracking_step(state, reference, &self.params, &self.gains, &self.att_gains, (w_c, w_c_dot))
    }
}

/// Plus-configuration allocation: rotor 0 on +x, 1 on +y, 2 on −x, 3 on −y.
/// Rotors 0 and 2 spin so that their reaction torque is −z, rotors 1 and 3 +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixer {
    pub arm: f64,
    /// Reaction torque per unit thrust.
    pub torque_ratio: f64,
}

impl Mixer {
    pub fn new(arm: f64, torque_ratio: f64) -> Result<Self> {
        if !(arm > 0.0 && arm.is_finite()) {
            return Err(GeomError::InvalidParameter { field: "arm", constraint: "positive" });
        }
        if !(torque_ratio > 0.0 && torque_ratio.is_finite()) {
            return Err(GeomError::InvalidParameter {
                field: "torque_ratio",
                constraint: "positive",
            });
        }
        Ok(Self { arm, torque_ratio })
    }

    /// Sign of each rotor's reaction torque about body z.
    pub const SPIN: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

    /// Rotor positions in the body frame.
    pub fn rotor_positions(&self) -> [Vec3; 4] {
        let d = self.arm;
        [Vec3::new(d, 0.0, 0.0), Vec3::new(0.0, d, 0.0), Vec3::new(-d, 0.0, 0.0), Vec3::new(0.0, -d, 0.0)]
    }

    fn matrix(&self) -> nalgebra::Matrix4<f64> {
        let (d, k) = (self.arm, self.torque_ratio);
        nalgebra::Matrix4::new(
            1.0, 1.0, 1.0, 1.0, //
            0.0, d, 0.0, -d, //
            -d, 0.0, d, 0.0, //
            -k, k, -k, k,
        )
    }

    /// Rotor thrusts realising collective `f` and body torque `q`.
    pub fn allocate(&self, thrust: f64, torque: &Vec3) -> [f64; 4] {
        let inv = self.matrix().try_inverse().expect("mixer matrix is invertible for positive arm and ratio");
        let t = inv * nalgebra::Vector4::new(thrust, torque.x, torque.y, torque.z);
        [t[0], t[1], t[2], t[3]]
    }

    /// Collective thrust and torque produced by the given rotor thrusts.
    pub fn combine(&self, rotor_thrusts: &[f64; 4]) -> (f64, Vec3) {
        let w = self.matrix() * nalgebra::Vector4::from_row_slice(rotor_thrusts);
        (w[0], Vec3::new(w[1], w[2], w[3]))
    }
}
