//! Geometric backstepping attitude tracking on SO(3).
//!
//! With `E = R_dᵀR` the attitude error is measured by
//! `ψ = 2 − √(1 + tr E)`, whose gradient is the error vector
//! `e_R = (E − Eᵀ)∨ / (2√(1 + tr E))`. The angular velocity is driven toward
//! the virtual command `Ω_tar = −P e_R + Eᵀ Ω_d`, and the torque law
//! `q = Ω × JΩ + J Ω̇_tar − F(Ω − Ω_tar)` renders
//! `V_a = k_R ψ + ½(Ω − Ω_tar)ᵀ S (Ω − Ω_tar)` non-increasing for the gain
//! choices validated here.

use crate::error::{GeomError, Result};
use crate::rigid_body::InertiaTensor;
use crate::so3::{antisym_vee, hat, Mat3, RotationMatrix, Vec3};

/// Smallest admissible `1 + tr E`.
pub const ANTIPODAL_MARGIN: f64 = 1e-12;

/// Desired attitude trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeReference {
    pub r_d: RotationMatrix,
    /// Desired body rate, desired-body frame.
    pub omega_d: Vec3,
    pub omega_d_dot: Vec3,
}

impl AttitudeReference {
    pub fn fixed(r_d: RotationMatrix) -> Self {
        Self {
            r_d,
            omega_d: Vec3::zeros(),
            omega_d_dot: Vec3::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeGains {
    pub p: Mat3,
    pub f: Mat3,
    pub k_r: f64,
    pub s: Mat3,
}

pub(crate) fn check_spd(m: &Mat3, name: &str) -> Result<()> {
    if !m.iter().all(|x| x.is_finite()) || (m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm()) {
        return Err(GeomError::InvalidGains(format!("{name} must be symmetric")));
    }
    if m.symmetric_eigenvalues().iter().any(|&l| l <= 0.0) {
        return Err(GeomError::InvalidGains(format!("{name} must be positive definite")));
    }
    Ok(())
}

impl AttitudeGains {
    pub fn new(p: Mat3, f: Mat3, k_r: f64, s: Mat3) -> Result<Self> {
        check_spd(&p, "P")?;
        check_spd(&f, "F")?;
        check_spd(&s, "S")?;
        if !(k_r > 0.0 && k_r.is_finite()) {
            return Err(GeomError::InvalidGains("k_R must be positive".into()));
        }
        Ok(Self { p, f, k_r, s })
    }

    /// `P = F = J`, `S = I`, `k_R = 1`.
    pub fn from_inertia(inertia: &InertiaTensor) -> Self {
        Self {
            p: *inertia.matrix(),
            f: *inertia.matrix(),
            k_r: 1.0,
            s: Mat3::identity(),
        }
    }
}

fn error_rotation(r: &RotationMatrix, r_d: &RotationMatrix) -> Result<(Mat3, f64)> {
    let e = r_d.matrix().transpose() * r.matrix();
    let tr = e.trace();
    // Past 90° the direct sum cancels badly; with a = (E − Eᵀ)∨ the identity
    // 1 + tr E = |a|² / (3 − tr E) keeps full relative precision up to 180°.
    let margin = if tr >= 0.0 {
        // Rounding can push tr E past 3; capping keeps ψ ≥ 0.
        (1.0 + tr).min(4.0)
    } else {
        antisym_vee(&e).norm_squared() / (3.0 - tr)
    };
    if !(margin >= ANTIPODAL_MARGIN) {
        return Err(GeomError::AntipodalError { margin });
    }
    Ok((e, margin))
}

/// `ψ(R, R_d) = 2 − √(1 + tr(R_dᵀR))`
pub fn attitude_error_psi(r: &RotationMatrix, r_d: &RotationMatrix) -> Result<f64> {
    let (_, margin) = error_rotation(r, r_d)?;
    Ok(2.0 - margin.sqrt())
}

/// `e_R = (E − Eᵀ)∨ / (2√(1 + tr E))`
pub fn attitude_error_vector(r: &RotationMatrix, r_d: &RotationMatrix) -> Result<Vec3> {
    let (e, margin) = error_rotation(r, r_d)?;
    Ok(antisym_vee(&e) / (2.0 * margin.sqrt()))
}

/// `e_Ω = Ω − RᵀR_d Ω_d`
pub fn angular_velocity_error(r: &RotationMatrix, omega: &Vec3, reference: &AttitudeReference) -> Vec3 {
    omega - r.matrix().transpose() * reference.r_d.matrix() * reference.omega_d
}

/// `Ω_tar = −P e_R + RᵀR_d Ω_d`
pub fn omega_target(r: &RotationMatrix, reference: &AttitudeReference, gains: &AttitudeGains) -> Result<Vec3> {
    let e_r = attitude_error_vector(r, &reference.r_d)?;
    Ok(-gains.p * e_r + r.matrix().transpose() * reference.r_d.matrix() * reference.omega_d)
}

/// Matrix `β` with `ė_R = β e_Ω`.
pub fn beta_matrix(r: &RotationMatrix, r_d: &RotationMatrix) -> Result<Mat3> {
    let (e, margin) = error_rotation(r, r_d)?;
    let e_r = antisym_vee(&e) / (2.0 * margin.sqrt());
    let et = e.transpose();
    Ok((e_r * e_r.transpose() * 2.0 + Mat3::identity() * et.trace() - et) / (2.0 * margin.sqrt()))
}

/// Intermediate quantities of the torque law at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeTerms {
    pub psi: f64,
    pub e_r: Vec3,
    pub e_omega: Vec3,
    pub omega_target: Vec3,
    pub omega_target_dot: Vec3,
    pub beta: Mat3,
    pub torque: Vec3,
}

impl AttitudeTerms {
    /// `V_a = k_R ψ + ½ (Ω − Ω_tar)ᵀ S (Ω − Ω_tar)`, given the current `Ω`.
    pub fn lyapunov(&self, omega: &Vec3, gains: &AttitudeGains) -> f64 {
        let e = omega - self.omega_target;
        gains.k_r * self.psi + 0.5 * e.dot(&(gains.s * e))
    }
}

/// Evaluates every term of the control law.
pub fn attitude_terms(
    r: &RotationMatrix,
    omega: &Vec3,
    reference: &AttitudeReference,
    inertia: &InertiaTensor,
    gains: &AttitudeGains,
) -> Result<AttitudeTerms> {
    let (e, margin) = error_rotation(r, &reference.r_d)?;
    let root = margin.sqrt();
    let e_r = antisym_vee(&e) / (2.0 * root);
    let et = e.transpose();
    let beta = (e_r * e_r.transpose() * 2.0 + Mat3::identity() * et.trace() - et) / (2.0 * root);

    let w_d_body = et * reference.omega_d;
    let e_omega = omega - w_d_body;
    let omega_target = -gains.p * e_r + w_d_body;
    let omega_target_dot = -hat(omega) * w_d_body + et * reference.omega_d_dot - gains.p * beta * e_omega;

    let j = inertia.matrix();
    let torque = omega.cross(&(j * omega)) + j * omega_target_dot - gains.f * (omega - omega_target);
    Ok(AttitudeTerms {
        psi: 2.0 - root,
        e_r,
        e_omega,
        omega_target,
        omega_target_dot,
        beta,
        torque,
    })
}

/// Backstepping control torque (body frame).
pub fn control_torque(
    r: &RotationMatrix,
    omega: &Vec3,
    reference: &AttitudeReference,
    inertia: &InertiaTensor,
    gains: &AttitudeGains,
) -> Result<Vec3> {
    attitude_terms(r, omega, reference, inertia, gains).map(|t| t.torque)
}

/// `V_a` at the given state.
pub fn attitude_lyapunov(
    r: &RotationMatrix,
    omega: &Vec3,
    reference: &AttitudeReference,
    gains: &AttitudeGains,
) -> Result<f64> {
    let psi = attitude_error_psi(r, &reference.r_d)?;
    let e = omega - omega_target(r, reference, gains)?;
    Ok(gains.k_r * psi + 0.5 * e.dot(&(gains.s * e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn j321() -> InertiaTensor {
        InertiaTensor::diagonal(3.0, 2.0, 1.0).unwrap()
    }

    #[test]
    fn psi_examples() {
        let r = RotationMatrix::rot_y(0.4);
        assert_eq!(attitude_error_psi(&r, &r).unwrap(), 0.0);
        let psi = attitude_error_psi(&RotationMatrix::rot_z(PI / 2.0), &RotationMatrix::identity()).unwrap();
        assert_relative_eq!(psi, 2.0 - 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(psi, 4.0 * (PI / 8.0).sin().powi(2), epsilon = 1e-15);
        let near = attitude_error_psi(&RotationMatrix::rot_x(PI - 1e-6), &RotationMatrix::identity()).unwrap();
        assert_relative_eq!(near, 2.0, epsilon = 1e-5);
    }

    #[test]
    fn antipodal_is_refused() {
        let err = attitude_error_psi(&RotationMatrix::rot_x(PI), &RotationMatrix::identity()).unwrap_err();
        assert!(matches!(err, GeomError::AntipodalError { .. }));
        assert!(beta_matrix(&RotationMatrix::rot_z(PI), &RotationMatrix::identity()).is_err());
    }

    #[test]
    fn error_vector_examples() {
        let r = RotationMatrix::rot_x(1.0);
        assert_eq!(attitude_error_vector(&r, &r).unwrap(), Vec3::zeros());
        let e = attitude_error_vector(&RotationMatrix::rot_z(0.7), &RotationMatrix::identity()).unwrap();
        assert_relative_eq!(e, Vec3::new(0.0, 0.0, 0.35f64.sin()), epsilon = 1e-15);
    }

    #[test]
    fn angular_velocity_error_examples() {
        let rd = RotationMatrix::rot_y(0.3);
        let w = Vec3::new(0.1, 0.2, 0.3);
        let rf = AttitudeReference {
            r_d: rd,
            omega_d: w,
            omega_d_dot: Vec3::zeros(),
        };
        assert_relative_eq!(angular_velocity_error(&rd, &w, &rf), Vec3::zeros(), epsilon = 1e-16);
        let still = AttitudeReference::fixed(rd);
        assert_eq!(angular_velocity_error(&rd, &w, &still), w);
        let spun = AttitudeReference {
            r_d: RotationMatrix::identity(),
            omega_d: Vec3::new(1.0, 0.0, 0.0),
            omega_d_dot: Vec3::zeros(),
        };
        let r = RotationMatrix::rot_z(PI / 2.0);
        assert_relative_eq!(
            angular_velocity_error(&r, &w, &spun),
            w - Vec3::new(0.0, -1.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn omega_target_examples() {
        let j = j321();
        let rd = RotationMatrix::rot_x(0.2);
        let rf = AttitudeReference {
            r_d: rd,
            omega_d: Vec3::new(0.0, 1.0, 2.0),
            omega_d_dot: Vec3::zeros(),
        };
        let g = AttitudeGains::from_inertia(&j);
        assert_relative_eq!(omega_target(&rd, &rf, &g).unwrap(), rf.omega_d, epsilon = 1e-15);

        let unit = AttitudeGains::new(Mat3::identity(), Mat3::identity(), 1.0, Mat3::identity()).unwrap();
        let r = RotationMatrix::from_axis_angle(&Vec3::new(1.0, -1.0, 0.5), 0.9);
        let rest = AttitudeReference::fixed(RotationMatrix::identity());
        let e_r = attitude_error_vector(&r, &RotationMatrix::identity()).unwrap();
        assert_relative_eq!(omega_target(&r, &rest, &unit).unwrap(), -e_r, epsilon = 1e-15);

        let expected = -j.matrix() * attitude_error_vector(&r, &rd).unwrap() + r.matrix().transpose() * rd.matrix() * rf.omega_d;
        assert_relative_eq!(omega_target(&r, &rf, &g).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn beta_examples() {
        let r = RotationMatrix::rot_x(0.3);
        assert_relative_eq!(beta_matrix(&r, &r).unwrap(), Mat3::identity() * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn beta_asymmetry_comes_only_from_error_rotation() {
        // β − βᵀ = (E − Eᵀ)/(2√(1 + tr E)), so β is symmetric exactly when RᵀR_d is.
        let rd = RotationMatrix::rot_z(0.2);
        for r in [RotationMatrix::rot_z(1.1), RotationMatrix::from_axis_angle(&Vec3::new(1.0, 2.0, 0.3), 2.0)] {
            let b = beta_matrix(&r, &rd).unwrap();
            let e = rd.matrix().transpose() * r.matrix();
            let expected = (e - e.transpose()) / (2.0 * (1.0 + e.trace()).sqrt());
            assert_relative_eq!(b - b.transpose(), expected, epsilon = 1e-14);
        }
        let b = beta_matrix(&RotationMatrix::identity(), &RotationMatrix::identity()).unwrap();
        assert_eq!(b, b.transpose());
    }

    #[test]
    fn torque_examples() {
        let j = j321();
        let g = AttitudeGains::from_inertia(&j);
        let rd = RotationMatrix::rot_y(0.8);
        let rest = AttitudeReference::fixed(rd);
        assert_relative_eq!(control_torque(&rd, &Vec3::zeros(), &rest, &j, &g).unwrap(), Vec3::zeros(), epsilon = 1e-15);

        let spin = AttitudeReference {
            r_d: rd,
            omega_d: Vec3::new(0.0, 0.0, 1.0),
            omega_d_dot: Vec3::zeros(),
        };
        let q = control_torque(&rd, &spin.omega_d, &spin, &j, &g).unwrap();
        assert_relative_eq!(q, Vec3::zeros(), epsilon = 1e-14);

        // Perfect tracking reduces to Ω × JΩ + J Ω̇_d.
        let tumble = AttitudeReference {
            r_d: rd,
            omega_d: Vec3::new(0.4, -0.2, 1.0),
            omega_d_dot: Vec3::new(0.1, 0.3, -0.2),
        };
        let w = tumble.omega_d;
        let q = control_torque(&rd, &w, &tumble, &j, &g).unwrap();
        let ff = w.cross(&(j.matrix() * w)) + j.matrix() * tumble.omega_d_dot;
        assert_relative_eq!(q, ff, epsilon = 1e-14);
    }

    #[test]
    fn gain_validation() {
        let bad = Mat3::from_diagonal(&Vec3::new(1.0, -1.0, 1.0));
        assert!(AttitudeGains::new(bad, Mat3::identity(), 1.0, Mat3::identity()).is_err());
        assert!(AttitudeGains::new(Mat3::identity(), Mat3::identity(), 0.0, Mat3::identity()).is_err());
    }

    #[test]
    fn lyapunov_zero_at_perfect_tracking() {
        let j = j321();
        let g = AttitudeGains::from_inertia(&j);
        let rf = AttitudeReference {
            r_d: RotationMatrix::rot_x(0.4),
            omega_d: Vec3::new(1.0, 2.0, 3.0),
            omega_d_dot: Vec3::zeros(),
        };
        let v = attitude_lyapunov(&rf.r_d, &rf.omega_d, &rf, &g).unwrap();
        assert!(v.abs() < 1e-14);
    }
}
