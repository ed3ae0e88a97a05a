//! Reference signals: attitude from polynomial 3-2-1 Euler angles and a
//! sinusoidal position trajectory.

use serde::{Deserialize, Serialize};

use crate::attitude::AttitudeReference;
use crate::quadrotor::TrajectoryReference;
use crate::so3::{RotationMatrix, Vec3};

/// Distance from ±π/2 pitch at which a gimbal warning is raised.
pub const GIMBAL_MARGIN: f64 = 1e-6;

/// `angle(t) = c[0] + c[1] t + c[2] t²`
pub type Quadratic = [f64; 3];

fn eval_quadratic(c: &Quadratic, t: f64) -> (f64, f64, f64) {
    (c[0] + t * (c[1] + t * c[2]), c[1] + 2.0 * c[2] * t, 2.0 * c[2])
}

/// Polynomial roll, pitch and yaw, composed as `Rz(yaw) Ry(pitch) Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerCoefficients {
    #[serde(default)]
    pub roll: Quadratic,
    #[serde(default)]
    pub pitch: Quadratic,
    #[serde(default)]
    pub yaw: Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerSample {
    pub reference: AttitudeReference,
    /// Pitch within [`GIMBAL_MARGIN`] of ±π/2.
    pub gimbal_warning: bool,
}

/// Desired attitude with body rate and acceleration in the desired-body frame.
pub fn euler_321_reference(t: f64, c: &EulerCoefficients) -> EulerSample {
    let (phi, dphi, ddphi) = eval_quadratic(&c.roll, t);
    let (theta, dtheta, ddtheta) = eval_quadratic(&c.pitch, t);
    let (psi, dpsi, ddpsi) = eval_quadratic(&c.yaw, t);
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();

    let r_d = RotationMatrix::rot_z(psi) * RotationMatrix::rot_y(theta) * RotationMatrix::rot_x(phi);
    let omega_d = Vec3::new(
        dphi - dpsi * st,
        dtheta * cp + dpsi * sp * ct,
        -dtheta * sp + dpsi * cp * ct,
    );
    let omega_d_dot = Vec3::new(
        ddphi - ddpsi * st - dpsi * dtheta * ct,
        ddtheta * cp - dtheta * dphi * sp + ddpsi * sp * ct + dpsi * dphi * cp * ct - dpsi * dtheta * sp * st,
        -ddtheta * sp - dtheta * dphi * cp + ddpsi * cp * ct - dpsi * dphi * sp * ct - dpsi * dtheta * cp * st,
    );
    EulerSample {
        reference: AttitudeReference { r_d, omega_d, omega_d_dot },
        gimbal_warning: (std::f64::consts::FRAC_PI_2 - theta.abs()).abs() < GIMBAL_MARGIN,
    }
}

/// `r_d = center + A (sin ωt, cos ωt, sin ωt)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleCoefficients {
    pub amplitude: f64,
    /// Angular frequency (rad/s).
    pub frequency: f64,
    #[serde(default)]
    pub center: [f64; 3],
    #[serde(default = "default_heading")]
    pub b1d: [f64; 3],
}

pub(crate) fn default_heading() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

impl Default for CircleCoefficients {
    fn default() -> Self {
        Self {
            amplitude: 4.0,
            frequency: 0.5,
            center: [0.0; 3],
            b1d: default_heading(),
        }
    }
}

pub fn circle_reference(t: f64, c: &CircleCoefficients) -> TrajectoryReference {
    let (s, co) = (c.frequency * t).sin_cos();
    let a = c.amplitude;
    let w = c.frequency;
    TrajectoryReference {
        r_d: Vec3::from(c.center) + a * Vec3::new(s, co, s),
        v_d: a * w * Vec3::new(co, -s, co),
        a_d: -a * w * w * Vec3::new(s, co, s),
        b_1d: Vec3::from(c.b1d).normalize(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{hat, Mat3};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn tracking_coefficients() -> EulerCoefficients {
        EulerCoefficients {
            roll: [0.999 * PI, 0.5, 0.0],
            pitch: [0.0, 0.0, 0.1],
            yaw: [0.0, -0.5, 0.2],
        }
    }

    #[test]
    fn zero_coefficients_give_identity() {
        for t in [0.0, 1.3, 7.0] {
            let s = euler_321_reference(t, &EulerCoefficients::default());
            assert_eq!(*s.reference.r_d.matrix(), Mat3::identity());
            assert_eq!(s.reference.omega_d, Vec3::zeros());
            assert_eq!(s.reference.omega_d_dot, Vec3::zeros());
        }
    }

    #[test]
    fn tracking_start_is_pure_roll() {
        let s = euler_321_reference(0.0, &tracking_coefficients());
        assert_relative_eq!(*s.reference.r_d.matrix(), *RotationMatrix::rot_x(0.999 * PI).matrix(), epsilon = 1e-15);
        assert!(!s.gimbal_warning);
    }

    #[test]
    fn rates_match_finite_differences() {
        let c = tracking_coefficients();
        let h = 1e-7;
        for t in [0.0, 0.7, 2.5, 6.1] {
            let s = euler_321_reference(t, &c).reference;
            let sp = euler_321_reference(t + h, &c).reference;
            let sm = euler_321_reference(t - h, &c).reference;
            let rdot = (sp.r_d.matrix() - sm.r_d.matrix()) / (2.0 * h);
            assert!((rdot - s.r_d.matrix() * hat(&s.omega_d)).amax() < 1e-6);
            let wdot = (sp.omega_d - sm.omega_d) / (2.0 * h);
            assert!((wdot - s.omega_d_dot).amax() < 1e-6);
        }
    }

    #[test]
    fn gimbal_warning_near_vertical_pitch() {
        let c = EulerCoefficients { pitch: [PI / 2.0, 0.0, 0.0], ..Default::default() };
        assert!(euler_321_reference(0.0, &c).gimbal_warning);
    }

    #[test]
    fn circle_at_start_and_derivatives() {
        let c = CircleCoefficients::default();
        let r = circle_reference(0.0, &c);
        assert_relative_eq!(r.r_d, Vec3::new(0.0, 4.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(r.v_d, Vec3::new(2.0, 0.0, 2.0), epsilon = 1e-15);
        assert_relative_eq!(r.a_d, Vec3::new(0.0, -1.0, 0.0), epsilon = 1e-15);
        assert_eq!(r.b_1d, Vec3::x());
        let h = 1e-5;
        for t in [0.3, 2.0, 9.4] {
            let p = circle_reference(t + h, &c);
            let m = circle_reference(t - h, &c);
            let r = circle_reference(t, &c);
            assert!(((p.r_d - m.r_d) / (2.0 * h) - r.v_d).amax() < 1e-8);
            assert!(((p.v_d - m.v_d) / (2.0 * h) - r.a_d).amax() < 1e-8);
        }
    }
}
