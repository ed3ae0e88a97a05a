//! Small-matrix calculus on SO(3) and its Lie algebra.
//!
//! Vectors and matrices are plain `nalgebra` fixed-size types. Rotations are
//! wrapped in [`RotationMatrix`], whose checked constructor refuses anything
//! that is not orthonormal with unit determinant to within
//! [`ROTATION_TOL`]. The only sanctioned repair path for a drifting matrix is
//! [`polar_project`].
//!
//! Two variation conventions appear in rigid-body mechanics and both are
//! exposed by name: a *space-frame* perturbation `δT = δθ̂·T`
//! ([`RotationMatrix::perturb_space`]) and a *body-frame* perturbation
//! `δT = T·δθ̂` ([`RotationMatrix::perturb_body`]).

use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{GeomError, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance used when validating rotation matrices.
pub const ROTATION_TOL: f64 = 1e-9;
/// Symmetric-part norm above which [`vee`] refuses its input.
pub const SKEW_TOL: f64 = 1e-6;
/// Below this angle the trigonometric factors switch to Taylor series.
pub const SMALL_ANGLE: f64 = 1e-4;
/// Smallest admissible singular value of `Ta + Tb` in [`rotation_mean`].
pub const MEAN_SIGMA_MIN: f64 = 1e-8;

/// A proper rotation matrix (`mᵀm = I`, `det m = +1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    /// Checked constructor.
    pub fn new(m: Mat3) -> Result<Self> {
        let orthogonality = orthogonality_defect(&m);
        let det = m.determinant();
        if !m.iter().all(|x| x.is_finite())
            || orthogonality > ROTATION_TOL
            || (det - 1.0).abs() > ROTATION_TOL
        {
            return Err(GeomError::NotRotation { orthogonality, det });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix without validation. Used for products of rotations,
    /// which stay on the group up to round-off, and for Runge-Kutta stage
    /// values that are projected back afterwards.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation by `angle` about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        exp_so3(&(axis.normalize() * angle))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_inner(self) -> Mat3 {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Column `i` of the matrix (the image of the `i`-th basis vector).
    pub fn column(&self, i: usize) -> Vec3 {
        self.0.column(i).into_owned()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `‖mᵀm − I‖_F`.
    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.0)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        log_so3(self).norm()
    }

    /// Space-frame perturbation `exp(δθ̂)·T`.
    pub fn perturb_space(&self, dtheta: &Vec3) -> Self {
        exp_so3(dtheta) * *self
    }

    /// Body-frame perturbation `T·exp(δθ̂)`.
    pub fn perturb_body(&self, dtheta: &Vec3) -> Self {
        *self * exp_so3(dtheta)
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for RotationMatrix {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// An element of so(3), stored as the vector it is the hat of.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMatrix(pub Vec3);

impl SkewMatrix {
    pub fn matrix(&self) -> Mat3 {
        hat(&self.0)
    }

    pub fn exp(&self) -> RotationMatrix {
        exp_so3(&self.0)
    }
}

fn orthogonality_defect(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// Cross-product matrix: `hat(v)·w = v × w`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]; returns the vector of the skew part of `m`.
pub fn vee(m: &Mat3) -> Result<Vec3> {
    let defect = (m + m.transpose()).norm() * 0.5;
    if !(defect <= SKEW_TOL) {
        return Err(GeomError::NotSkew { defect });
    }
    Ok(skew_vee(m))
}

/// Vector of the skew part `½(m − mᵀ)` of an arbitrary matrix.
pub fn skew_vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// `(m − mᵀ)∨`, the Hodge dual of the antisymmetric part (twice [`skew_vee`]).
pub fn antisym_vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    )
}

/// `sin x / x`
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < SMALL_ANGLE {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `(1 − cos x) / x²`
pub(crate) fn cosc(x: f64) -> f64 {
    if x.abs() < SMALL_ANGLE {
        let x2 = x * x;
        0.5 - x2 / 24.0 + x2 * x2 / 720.0
    } else {
        (1.0 - x.cos()) / (x * x)
    }
}

/// `x / sin x`
fn inv_sinc(x: f64) -> f64 {
    if x.abs() < SMALL_ANGLE {
        let x2 = x * x;
        1.0 + x2 / 6.0 + 7.0 * x2 * x2 / 360.0
    } else {
        x / x.sin()
    }
}

/// Rodrigues formula `I + (sin θ/θ) v̂ + ((1 − cos θ)/θ²) v̂²`, `θ = ‖v‖`.
pub fn exp_so3(v: &Vec3) -> RotationMatrix {
    let theta = v.norm();
    let k = hat(v);
    RotationMatrix(Mat3::identity() + k * sinc(theta) + k * k * cosc(theta))
}

/// Rotation vector of `r`, with norm in `[0, π]`.
pub fn log_so3(r: &RotationMatrix) -> Vec3 {
    let m = r.matrix();
    // s = sin θ · n, c = cos θ
    let s = skew_vee(m);
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin_theta = s.norm();
    let theta = sin_theta.atan2(c);

    if c > -0.999 {
        return s * inv_sinc(theta);
    }

    // Near π: the symmetric part is cos θ·I + (1 − cos θ)·n nᵀ.
    let sym = (m + m.transpose()) * 0.5;
    let nnt = (sym - Mat3::identity() * c) / (1.0 - c);
    let i = (0..3)
        .max_by(|&a, &b| nnt[(a, a)].total_cmp(&nnt[(b, b)]))
        .unwrap_or(0);
    let mut axis: Vec3 = nnt.column(i).into_owned();
    axis /= axis.norm();
    // Orientation of the axis comes from the largest skew component.
    let j = s.iamax();
    if s[j] * axis[j] < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// `Tr(m)·I − m`
pub fn tilde(m: &Mat3) -> Mat3 {
    Mat3::identity() * m.trace() - m
}

/// Mean of two rotations: the rotation factor of the left polar
/// decomposition `Ta + Tb = V·T_mid`, `V` symmetric positive definite.
pub fn rotation_mean(ta: &RotationMatrix, tb: &RotationMatrix) -> Result<RotationMatrix> {
    polar_decompose(&(ta.matrix() + tb.matrix())).map(|(rot, _)| rot)
}

/// Left polar decomposition `m = V·Q` via SVD. Fails when the smallest
/// singular value is below [`MEAN_SIGMA_MIN`] or `det m ≤ 0`.
pub(crate) fn polar_decompose(m: &Mat3) -> Result<(RotationMatrix, Mat3)> {
    let svd = m.svd(true, true);
    let sigma_min = svd.singular_values.min();
    if !(sigma_min >= MEAN_SIGMA_MIN) || m.determinant() <= 0.0 {
        return Err(GeomError::DegenerateMean { sigma_min });
    }
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(GeomError::DegenerateMean { sigma_min });
    };
    let rot = u * v_t;
    let stretch = u * Mat3::from_diagonal(&svd.singular_values) * u.transpose();
    let stretch = (stretch + stretch.transpose()) * 0.5;
    Ok((RotationMatrix(rot), stretch))
}

/// Angle of the relative rotation `AᵀB` (rad).
pub fn attitude_distance(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    (a.transpose() * *b).angle()
}

/// Nearest rotation in the Frobenius norm (orthogonal polar factor).
pub fn polar_project(m: &Mat3) -> Result<RotationMatrix> {
    let det = m.determinant();
    if !(det > 1e-12) {
        return Err(GeomError::SingularInput { det });
    }
    let svd = m.svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => Ok(RotationMatrix(u * v_t)),
        _ => Err(GeomError::SingularInput { det }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn hat_examples() {
        let m = hat(&Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(m, Mat3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0));
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
        let v = Vec3::new(0.3, -1.2, 2.0);
        assert_eq!(hat(&v) * v, Vec3::zeros());
    }

    #[test]
    fn vee_examples() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(vee(&hat(&v)).unwrap(), v);
        assert_eq!(vee(&Mat3::zeros()).unwrap(), Vec3::zeros());
        let e = RotationMatrix::rot_z(0.7);
        let d = e.matrix() - e.matrix().transpose();
        assert_relative_eq!(
            vee(&d).unwrap(),
            Vec3::new(0.0, 0.0, 2.0 * 0.7f64.sin()),
            epsilon = 1e-15
        );
    }

    #[test]
    fn vee_rejects_symmetric() {
        let err = vee(&Mat3::identity()).unwrap_err();
        assert!(matches!(err, GeomError::NotSkew { .. }));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(exp_so3(&Vec3::zeros()).into_inner(), Mat3::identity());
        let r = exp_so3(&Vec3::new(PI / 2.0, 0.0, 0.0));
        let expected = Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_relative_eq!(*r.matrix(), expected, epsilon = 1e-15);
        let v = Vec3::new(0.1, 0.2, 0.3);
        let p = exp_so3(&v) * exp_so3(&-v);
        assert_relative_eq!(*p.matrix(), Mat3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn taylor_branches_match_closed_forms_at_switch() {
        let x = SMALL_ANGLE * 0.999;
        assert!((sinc(x) - x.sin() / x).abs() < 1e-15);
        assert!((cosc(x) - (1.0 - x.cos()) / (x * x)).abs() < 1e-7);
        assert!((inv_sinc(x) - x / x.sin()).abs() < 1e-15);
        let axis = Vec3::new(1.0, -2.0, 0.5).normalize();
        let r = exp_so3(&(axis * x));
        assert!(r.orthogonality_defect() < 1e-15);
        assert_relative_eq!(log_so3(&r), axis * x, epsilon = 1e-18);
    }

    #[test]
    fn log_examples() {
        assert_eq!(log_so3(&RotationMatrix::identity()), Vec3::zeros());
        assert_relative_eq!(
            log_so3(&RotationMatrix::rot_x(PI / 2.0)),
            Vec3::new(PI / 2.0, 0.0, 0.0),
            epsilon = 1e-14
        );
        let near_pi = RotationMatrix::rot_x(0.999 * PI);
        assert_relative_eq!(
            log_so3(&near_pi),
            Vec3::new(0.999 * PI, 0.0, 0.0),
            epsilon = 1e-12
        );
        let exactly_pi = RotationMatrix::rot_y(PI);
        let v = log_so3(&exactly_pi);
        assert_relative_eq!(v.norm(), PI, epsilon = 1e-12);
        assert_relative_eq!(*exp_so3(&v).matrix(), *exactly_pi.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn mean_examples() {
        let a = RotationMatrix::from_axis_angle(&Vec3::new(1.0, 1.0, 0.2), 0.8);
        assert_relative_eq!(
            *rotation_mean(&a, &a).unwrap().matrix(),
            *a.matrix(),
            epsilon = 1e-15
        );
        let m = rotation_mean(&RotationMatrix::identity(), &RotationMatrix::rot_z(PI / 2.0)).unwrap();
        assert_relative_eq!(*m.matrix(), *RotationMatrix::rot_z(PI / 4.0).matrix(), epsilon = 1e-14);
        let err = rotation_mean(&RotationMatrix::identity(), &RotationMatrix::rot_z(PI - 1e-9));
        assert!(matches!(err, Err(GeomError::DegenerateMean { .. })));
    }

    #[test]
    fn tilde_examples() {
        assert_eq!(tilde(&Mat3::identity()), Mat3::identity() * 2.0);
        assert_eq!(tilde(&Mat3::zeros()), Mat3::zeros());
        assert_eq!(
            tilde(&Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0))),
            Mat3::from_diagonal(&Vec3::new(5.0, 4.0, 3.0))
        );
    }

    #[test]
    fn polar_project_examples() {
        let r = RotationMatrix::from_axis_angle(&Vec3::new(0.3, -0.4, 1.0), 1.3);
        assert_relative_eq!(*polar_project(r.matrix()).unwrap().matrix(), *r.matrix(), epsilon = 1e-12);
        assert_relative_eq!(
            *polar_project(&(Mat3::identity() * 1.1)).unwrap().matrix(),
            Mat3::identity(),
            epsilon = 1e-15
        );
        assert!(matches!(
            polar_project(&Mat3::zeros()),
            Err(GeomError::SingularInput { .. })
        ));
        assert!(matches!(
            polar_project(&-Mat3::identity()),
            Err(GeomError::SingularInput { .. })
        ));
    }

    #[test]
    fn checked_constructor_refuses_drift() {
        assert!(RotationMatrix::new(Mat3::identity() * (1.0 + 1e-8)).is_err());
        assert!(RotationMatrix::new(-Mat3::identity()).is_err());
        assert!(RotationMatrix::new(*RotationMatrix::rot_y(0.4).matrix()).is_ok());
    }

    #[test]
    fn variation_conventions_differ() {
        let t = RotationMatrix::rot_x(0.5);
        let d = Vec3::new(0.0, 0.0, 0.1);
        let space = t.perturb_space(&d);
        let body = t.perturb_body(&d);
        assert_relative_eq!(*space.matrix(), *(exp_so3(&d) * t).matrix());
        assert_relative_eq!(*body.matrix(), *(t * exp_so3(&d)).matrix());
        // body perturbation δθ equals space perturbation T δθ
        let body_as_space = t.perturb_space(&t.rotate(&d));
        assert_relative_eq!(*body.matrix(), *body_as_space.matrix(), epsilon = 1e-14);
    }
}
