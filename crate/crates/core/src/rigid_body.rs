//! Continuous-time rigid-body models and a classical RK4 reference stepper.
//!
//! Frames: inertial z-up with gravity `(0, 0, −g)`; attitudes map body to
//! inertial coordinates; angular velocities are body-frame.

use nalgebra::SVector;

use crate::error::{GeomError, Result};
use crate::so3::{hat, polar_project, Mat3, RotationMatrix, Vec3};

pub const STANDARD_GRAVITY: f64 = 9.81;

/// Symmetric positive-definite inertia tensor (kg·m²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaTensor {
    j: Mat3,
    j_inv: Mat3,
}

impl InertiaTensor {
    pub fn new(j: Mat3) -> Result<Self> {
        if !j.iter().all(|x| x.is_finite()) {
            return Err(GeomError::InvalidInertia("non-finite entry".into()));
        }
        if (j - j.transpose()).norm() > 1e-12 {
            return Err(GeomError::InvalidInertia("not symmetric".into()));
        }
        let eig = j.symmetric_eigenvalues();
        if eig.iter().any(|&l| l <= 0.0) {
            return Err(GeomError::InvalidInertia(format!(
                "principal moments must be positive, got {:?}",
                eig.as_slice()
            )));
        }
        for k in 0..3 {
            let (a, b) = (eig[(k + 1) % 3], eig[(k + 2) % 3]);
            if a + b < eig[k] - 1e-9 {
                return Err(GeomError::InvalidInertia(format!(
                    "principal moments {:?} violate the triangle inequality",
                    eig.as_slice()
                )));
            }
        }
        let j_inv = j
            .try_inverse()
            .ok_or_else(|| GeomError::InvalidInertia("singular".into()))?;
        Ok(Self { j, j_inv })
    }

    pub fn diagonal(jx: f64, jy: f64, jz: f64) -> Result<Self> {
        Self::new(Mat3::from_diagonal(&Vec3::new(jx, jy, jz)))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.j
    }

    pub fn inverse(&self) -> &Mat3 {
        &self.j_inv
    }

    pub fn apply(&self, w: &Vec3) -> Vec3 {
        self.j * w
    }

    pub fn solve(&self, p: &Vec3) -> Vec3 {
        self.j_inv * p
    }
}

/// Attitude and body angular velocity of a free or forced rigid body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    pub attitude: RotationMatrix,
    pub omega: Vec3,
}

impl RigidBodyState {
    pub fn new(attitude: RotationMatrix, omega: Vec3) -> Self {
        Self { attitude, omega }
    }
}

/// Full quadrotor state: inertial position/velocity, attitude and body rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrotorState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: RotationMatrix,
    pub omega: Vec3,
}

/// Extra force/moment acting on the vehicle, both in body coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyWrench {
    pub force_body: Vec3,
    pub moment_body: Vec3,
}

impl BodyWrench {
    pub fn zero() -> Self {
        Self::default()
    }
}

/// Mass properties of the quadrotor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrotorParams {
    /// kg
    pub mass: f64,
    pub inertia: InertiaTensor,
    /// Rotor arm length, m.
    pub arm: f64,
    /// m/s²
    pub gravity: f64,
}

impl QuadrotorParams {
    pub fn new(mass: f64, inertia: InertiaTensor, arm: f64, gravity: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(GeomError::InvalidParameter {
                field: "mass",
                constraint: "> 0",
            });
        }
        if !(arm > 0.0 && arm.is_finite()) {
            return Err(GeomError::InvalidParameter {
                field: "arm",
                constraint: "> 0",
            });
        }
        if !(gravity > 0.0 && gravity.is_finite()) {
            return Err(GeomError::InvalidParameter {
                field: "gravity",
                constraint: "> 0",
            });
        }
        Ok(Self {
            mass,
            inertia,
            arm,
            gravity,
        })
    }

    pub fn gravity_vector(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.gravity)
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Time derivative of a [`QuadrotorState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrotorRate {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Mat3,
    pub omega: Vec3,
}

/// `Ṫ = T ω̂`, `ω̇ = J⁻¹(M − ω × Jω)`.
pub fn attitude_rhs(state: &RigidBodyState, inertia: &InertiaTensor, moment: &Vec3) -> (Mat3, Vec3) {
    let t_dot = state.attitude.matrix() * hat(&state.omega);
    let jw = inertia.apply(&state.omega);
    let w_dot = inertia.solve(&(moment - state.omega.cross(&jw)));
    (t_dot, w_dot)
}

/// [`attitude_rhs`] with an additional potential moment `potential(T)`
/// (body frame), standing in for `½[∂U/∂Tᵀ T − Tᵀ ∂U/∂T]ₓ`.
pub fn attitude_rhs_with_potential<P>(
    state: &RigidBodyState,
    inertia: &InertiaTensor,
    moment: &Vec3,
    potential: P,
) -> (Mat3, Vec3)
where
    P: Fn(&RotationMatrix) -> Vec3,
{
    attitude_rhs(state, inertia, &(moment + potential(&state.attitude)))
}

/// Quadrotor equations of motion with thrust `f` along body z.
pub fn quadrotor_rhs(
    state: &QuadrotorState,
    params: &QuadrotorParams,
    thrust: f64,
    moment: &Vec3,
    extra: &BodyWrench,
) -> QuadrotorRate {
    let body_force = Vec3::new(0.0, 0.0, thrust) + extra.force_body;
    let accel = params.gravity_vector() + state.attitude.rotate(&body_force) / params.mass;
    let jw = params.inertia.apply(&state.omega);
    let w_dot = params
        .inertia
        .solve(&(moment + extra.moment_body - state.omega.cross(&jw)));
    QuadrotorRate {
        position: state.velocity,
        velocity: accel,
        attitude: state.attitude.matrix() * hat(&state.omega),
        omega: w_dot,
    }
}

/// `½ ωᵀJω`
pub fn kinetic_energy(state: &RigidBodyState, inertia: &InertiaTensor) -> f64 {
    0.5 * state.omega.dot(&inertia.apply(&state.omega))
}

/// Inertial angular momentum `T·(Jω)`.
pub fn spatial_momentum(state: &RigidBodyState, inertia: &InertiaTensor) -> Vec3 {
    state.attitude.rotate(&inertia.apply(&state.omega))
}

/// One classical fourth-order Runge-Kutta step for `ẋ = f(t, x)`.
pub fn rk4_step<F, const N: usize>(mut rhs: F, t: f64, x: &SVector<f64, N>, dt: f64) -> SVector<f64, N>
where
    F: FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let h2 = 0.5 * dt;
    let k1 = rhs(t, x);
    let k2 = rhs(t + h2, &(x + k1 * h2));
    let k3 = rhs(t + h2, &(x + k2 * h2));
    let k4 = rhs(t + dt, &(x + k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn pack_mat(m: &Mat3, out: &mut [f64]) {
    out.copy_from_slice(m.as_slice());
}

fn unpack_mat(s: &[f64]) -> Mat3 {
    Mat3::from_column_slice(s)
}

fn pack_vec(v: &Vec3, out: &mut [f64]) {
    out.copy_from_slice(v.as_slice());
}

fn unpack_vec(s: &[f64]) -> Vec3 {
    Vec3::from_column_slice(s)
}

impl RigidBodyState {
    /// Attitude as nine column-major entries followed by ω.
    pub fn to_vector(&self) -> SVector<f64, 12> {
        let mut x = SVector::<f64, 12>::zeros();
        pack_mat(self.attitude.matrix(), &mut x.as_mut_slice()[0..9]);
        pack_vec(&self.omega, &mut x.as_mut_slice()[9..12]);
        x
    }

    /// Inverse of [`Self::to_vector`]; the attitude is not validated.
    pub fn from_vector_unchecked(x: &SVector<f64, 12>) -> Self {
        let s = x.as_slice();
        Self {
            attitude: RotationMatrix::from_matrix_unchecked(unpack_mat(&s[0..9])),
            omega: unpack_vec(&s[9..12]),
        }
    }
}

impl QuadrotorState {
    /// `[r, v, vec(R), Ω]`
    pub fn to_vector(&self) -> SVector<f64, 18> {
        let mut x = SVector::<f64, 18>::zeros();
        let s = x.as_mut_slice();
        pack_vec(&self.position, &mut s[0..3]);
        pack_vec(&self.velocity, &mut s[3..6]);
        pack_mat(self.attitude.matrix(), &mut s[6..15]);
        pack_vec(&self.omega, &mut s[15..18]);
        x
    }

    pub fn from_vector_unchecked(x: &SVector<f64, 18>) -> Self {
        let s = x.as_slice();
        Self {
            position: unpack_vec(&s[0..3]),
            velocity: unpack_vec(&s[3..6]),
            attitude: RotationMatrix::from_matrix_unchecked(unpack_mat(&s[6..15])),
            omega: unpack_vec(&s[15..18]),
        }
    }
}

impl QuadrotorRate {
    pub fn to_vector(&self) -> SVector<f64, 18> {
        let mut x = SVector::<f64, 18>::zeros();
        let s = x.as_mut_slice();
        pack_vec(&self.position, &mut s[0..3]);
        pack_vec(&self.velocity, &mut s[3..6]);
        pack_mat(&self.attitude, &mut s[6..15]);
        pack_vec(&self.omega, &mut s[15..18]);
        x
    }
}

/// RK4 step of the forced attitude dynamics; `moment(t, state)` is evaluated
/// at every stage. The attitude is projected back onto SO(3) afterwards.
pub fn rk4_attitude_step<M>(
    state: &RigidBodyState,
    inertia: &InertiaTensor,
    mut moment: M,
    t: f64,
    dt: f64,
) -> Result<RigidBodyState>
where
    M: FnMut(f64, &RigidBodyState) -> Vec3,
{
    let x = state.to_vector();
    let next = rk4_step(
        |tau, y| {
            let s = RigidBodyState::from_vector_unchecked(y);
            let m = moment(tau, &s);
            let (t_dot, w_dot) = attitude_rhs(&s, inertia, &m);
            let mut out = SVector::<f64, 12>::zeros();
            pack_mat(&t_dot, &mut out.as_mut_slice()[0..9]);
            pack_vec(&w_dot, &mut out.as_mut_slice()[9..12]);
            out
        },
        t,
        &x,
        dt,
    );
    let raw = RigidBodyState::from_vector_unchecked(&next);
    Ok(RigidBodyState {
        attitude: polar_project(raw.attitude.matrix())?,
        omega: raw.omega,
    })
}

/// RK4 step of the quadrotor with inputs from `inputs(t, state)` returning
/// `(thrust, moment, extra wrench)`; attitude re-projected afterwards.
pub fn rk4_quadrotor_step<U>(
    state: &QuadrotorState,
    params: &QuadrotorParams,
    mut inputs: U,
    t: f64,
    dt: f64,
) -> Result<QuadrotorState>
where
    U: FnMut(f64, &QuadrotorState) -> (f64, Vec3, BodyWrench),
{
    let x = state.to_vector();
    let next = rk4_step(
        |tau, y| {
            let s = QuadrotorState::from_vector_unchecked(y);
            let (f, q, extra) = inputs(tau, &s);
            quadrotor_rhs(&s, params, f, &q, &extra).to_vector()
        },
        t,
        &x,
        dt,
    );
    let mut raw = QuadrotorState::from_vector_unchecked(&next);
    raw.attitude = polar_project(raw.attitude.matrix())?;
    Ok(raw)
}
