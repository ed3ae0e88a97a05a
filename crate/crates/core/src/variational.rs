//! Second-order forced Lie-group variational integrator for rigid-body
//! attitude dynamics.
//!
//! The discrete Lagrangian on an interval `[k, k+1]` is the midpoint rule
//! `L_d = ½ ω_{k+½}ᵀ J ω_{k+½}` with
//!
//! * `T_k + T_{k+1} = V·T_{k+½}` (polar mean, `V` symmetric),
//! * `R_{k+½} = T_{k+1} T_kᵀ = exp(ψ̂)`,
//! * `ω_{k+½} = T_{k+½}ᵀ ψ / Δ`.
//!
//! Variations are taken in the space frame, `δT = δθ̂·T`, so the discrete
//! Legendre transforms ([`theta_minus`], [`theta_plus`]) return inertial
//! angular-momentum covectors. They are scaled by `Δ` relative to the
//! `D₁L_d`, `D₂L_d` partials so that they carry momentum units: for a free
//! body both equal `T·J·ω` in the continuous limit.
//!
//! The one-step map `(T_k, ω_k) → (T_{k+1}, ω_{k+1})` uses the
//! position-momentum form of the discrete Euler-Lagrange equation
//! `Θ⁺_k − Θ⁻_k + F⁺_k + F⁻_k = 0`:
//!
//! ```text
//! p_k       = T_k J ω_k
//! p_k       = Θ⁻(T_k, T_{k+1}) − Δ·F⁻_k          (solved for T_{k+1})
//! p_{k+1}   = Θ⁺(T_k, T_{k+1}) + Δ·F⁺_{k+1}
//! ω_{k+1}   = J⁻¹ T_{k+1}ᵀ p_{k+1}
//! ```
//!
//! No potential terms are included; conservative effects must enter through
//! the moment callback.

use nalgebra::Matrix3;

use crate::error::{GeomError, Result};
use crate::rigid_body::{kinetic_energy, spatial_momentum, InertiaTensor, RigidBodyState};
use crate::so3::{exp_so3, hat, log_so3, polar_decompose, sinc, tilde, Mat3, RotationMatrix, Vec3, SMALL_ANGLE};

/// Interval quantities of the midpoint discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointQuantities {
    /// `T_{k+½}`
    pub t_mid: RotationMatrix,
    /// Symmetric factor `V` of `T_k + T_{k+1} = V T_{k+½}`.
    pub v: Mat3,
    /// `R_{k+½} = T_{k+1} T_kᵀ`
    pub r_rel: RotationMatrix,
    /// Space-frame rotation vector of `r_rel`.
    pub psi: Vec3,
    /// Body-frame midpoint angular velocity.
    pub omega_mid: Vec3,
    /// `Y_k = T_k T_{k+½}ᵀ`
    pub y_k: Mat3,
    /// `Y_{k+1} = T_{k+1} T_{k+½}ᵀ`
    pub y_k1: Mat3,
    /// Derivative of `ψ ↦ (sin‖ψ‖/‖ψ‖)ψ`.
    pub f_mat: Mat3,
}

/// Step size and Newton settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    /// Residual ∞-norm accepted as converged.
    pub newton_tol: f64,
    pub max_iters: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64) -> Result<Self> {
        Self {
            dt,
            ..Self::default()
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(GeomError::InvalidParameter {
                field: "dt",
                constraint: "> 0",
            });
        }
        if !(self.newton_tol > 0.0) {
            return Err(GeomError::InvalidParameter {
                field: "newton_tol",
                constraint: "> 0",
            });
        }
        if self.max_iters < 1 {
            return Err(GeomError::InvalidParameter {
                field: "max_iters",
                constraint: ">= 1",
            });
        }
        Ok(self)
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            newton_tol: 1e-12,
            max_iters: 50,
        }
    }
}

/// Outcome of one [`vi_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub t_next: RotationMatrix,
    pub omega_next: Vec3,
    pub newton_iters: usize,
    pub residual: f64,
}

/// `((x cos x − sin x)/x³) ψψᵀ + (sin x/x) I`, `x = ‖ψ‖`.
fn sin_map_jacobian(psi: &Vec3) -> Mat3 {
    let x = psi.norm();
    let c1 = if x < SMALL_ANGLE {
        let x2 = x * x;
        -1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0
    } else {
        (x * x.cos() - x.sin()) / (x * x * x)
    };
    psi * psi.transpose() * c1 + Mat3::identity() * sinc(x)
}

fn from_rotation_vector(t_k: &RotationMatrix, psi: Vec3, t_k1: RotationMatrix, dt: f64) -> Result<MidpointQuantities> {
    let (t_mid, v) = polar_decompose(&(t_k.matrix() + t_k1.matrix()))?;
    let r_rel = t_k1 * t_k.transpose();
    Ok(MidpointQuantities {
        t_mid,
        v,
        r_rel,
        psi,
        omega_mid: t_mid.matrix().transpose() * psi / dt,
        y_k: t_k.matrix() * t_mid.matrix().transpose(),
        y_k1: t_k1.matrix() * t_mid.matrix().transpose(),
        f_mat: sin_map_jacobian(&psi),
    })
}

/// Midpoint quantities of the interval `[T_k, T_{k+1}]`.
pub fn midpoint_quantities(t_k: &RotationMatrix, t_k1: &RotationMatrix, dt: f64) -> Result<MidpointQuantities> {
    let r_rel = *t_k1 * t_k.transpose();
    from_rotation_vector(t_k, log_so3(&r_rel), *t_k1, dt)
}

impl MidpointQuantities {
    /// Inertial midpoint momentum `T_{k+½} J ω_{k+½}`.
    fn mid_momentum(&self, inertia: &InertiaTensor) -> Vec3 {
        self.t_mid.rotate(&inertia.apply(&self.omega_mid))
    }

    fn v_tilde_inv(&self) -> Mat3 {
        // Ṽ = tr(V)I − V is positive definite whenever V is.
        tilde(&self.v).try_inverse().unwrap_or_else(|| Matrix3::from_element(f64::NAN))
    }

    fn half_f_inv_r_tilde(&self) -> Mat3 {
        let f_inv = self.f_mat.try_inverse().unwrap_or_else(|| Matrix3::from_element(f64::NAN));
        f_inv * tilde(self.r_rel.matrix()) * 0.5
    }

    /// Sensitivity `∂δθ_{k+½}/∂δθ_k = Ṽ⁻¹ Ỹ_k`.
    pub fn mean_sensitivity_left(&self) -> Mat3 {
        self.v_tilde_inv() * tilde(&self.y_k)
    }

    /// Sensitivity `∂δθ_{k+½}/∂δθ_{k+1} = Ṽ⁻¹ Ỹ_{k+1}`.
    pub fn mean_sensitivity_right(&self) -> Mat3 {
        self.v_tilde_inv() * tilde(&self.y_k1)
    }

    /// `Δ·∂ω_{k+½}/∂δθ_k` (without the `T_{k+½}ᵀ` factor).
    fn rate_sensitivity_left(&self) -> Mat3 {
        hat(&self.psi) * self.mean_sensitivity_left() - self.half_f_inv_r_tilde() * self.r_rel.matrix()
    }

    /// `Δ·∂ω_{k+½}/∂δθ_{k+1}` (without the `T_{k+½}ᵀ` factor).
    fn rate_sensitivity_right(&self) -> Mat3 {
        hat(&self.psi) * self.mean_sensitivity_right() + self.half_f_inv_r_tilde()
    }

    /// Forcing covector a space-frame moment on this interval contributes to
    /// its left node (`F⁻` of node `k`).
    pub fn force_left(&self, moment_space: &Vec3) -> Vec3 {
        self.mean_sensitivity_left().transpose() * moment_space
    }

    /// Forcing covector contributed to the right node (`F⁺` of node `k+1`).
    pub fn force_right(&self, moment_space: &Vec3) -> Vec3 {
        self.mean_sensitivity_right().transpose() * moment_space
    }
}

fn theta_minus_of(mq: &MidpointQuantities, inertia: &InertiaTensor) -> Vec3 {
    -(mq.rate_sensitivity_left().transpose() * mq.mid_momentum(inertia))
}

fn theta_plus_of(mq: &MidpointQuantities, inertia: &InertiaTensor) -> Vec3 {
    mq.rate_sensitivity_right().transpose() * mq.mid_momentum(inertia)
}

/// Left discrete Legendre transform `Θ⁻_k = −Δ·D₁L_d(T_k, T_{k+1})`.
pub fn theta_minus(t_k: &RotationMatrix, t_k1: &RotationMatrix, dt: f64, inertia: &InertiaTensor) -> Result<Vec3> {
    Ok(theta_minus_of(&midpoint_quantities(t_k, t_k1, dt)?, inertia))
}

/// Right discrete Legendre transform `Θ⁺_k = Δ·D₂L_d(T_{k−1}, T_k)`.
pub fn theta_plus(t_km1: &RotationMatrix, t_k: &RotationMatrix, dt: f64, inertia: &InertiaTensor) -> Result<Vec3> {
    Ok(theta_plus_of(&midpoint_quantities(t_km1, t_k, dt)?, inertia))
}

/// Discrete forcing at node `k` from the space-frame moments of the
/// intervals `[k−1, k]` (`prev`) and `[k, k+1]` (`next`). Returns
/// `(F⁺_k, F⁻_k)`.
pub fn discrete_forces(
    moment_minus_half: &Vec3,
    moment_plus_half: &Vec3,
    prev: &MidpointQuantities,
    next: &MidpointQuantities,
) -> (Vec3, Vec3) {
    (prev.force_right(moment_minus_half), next.force_left(moment_plus_half))
}

/// Lagrangian value `½ ω_{k+½}ᵀ J ω_{k+½}` of an interval.
pub fn discrete_lagrangian(mq: &MidpointQuantities, inertia: &InertiaTensor) -> f64 {
    0.5 * mq.omega_mid.dot(&inertia.apply(&mq.omega_mid))
}

const FD_STEP: f64 = 1e-7;
const MAX_HALVINGS: usize = 30;

/// One step of the flow map. `moment(t, T_mid, ω_mid)` returns the body-frame
/// moment at the interval midpoint time `t_k + Δ/2`; it may depend on the
/// unknown midpoint state, which makes the forcing implicit.
pub fn vi_step<M>(
    t_k: &RotationMatrix,
    omega_k: &Vec3,
    time: f64,
    moment: &mut M,
    inertia: &InertiaTensor,
    cfg: &IntegratorConfig,
) -> Result<StepResult>
where
    M: FnMut(f64, &RotationMatrix, &Vec3) -> Vec3,
{
    let dt = cfg.dt;
    let t_half = time + 0.5 * dt;
    let p_k = t_k.rotate(&inertia.apply(omega_k));

    let mut eval = |eta: &Vec3| -> Result<(Vec3, MidpointQuantities, Vec3)> {
        let t_k1 = exp_so3(eta) * *t_k;
        let mq = from_rotation_vector(t_k, *eta, t_k1, dt)?;
        let m_space = mq.t_mid.rotate(&moment(t_half, &mq.t_mid, &mq.omega_mid));
        let r = theta_minus_of(&mq, inertia) - mq.force_left(&m_space) * dt - p_k;
        Ok((r, mq, m_space))
    };

    let mut eta = t_k.rotate(omega_k) * dt;
    let (mut r, mut mq, mut m_space) = eval(&eta)?;
    let mut res = r.amax();
    let mut iters = 0;

    while !(res < cfg.newton_tol) {
        if iters >= cfg.max_iters {
            return Err(GeomError::NoConvergence { iters, residual: res });
        }
        iters += 1;

        let mut jac = Mat3::zeros();
        for i in 0..3 {
            let mut e = eta;
            e[i] += FD_STEP;
            let (ri, _, _) = eval(&e)?;
            jac.set_column(i, &((ri - r) / FD_STEP));
        }
        let delta = jac
            .lu()
            .solve(&-r)
            .ok_or(GeomError::NoConvergence { iters, residual: res })?;

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = eta + delta * scale;
            if let Ok((rt, mqt, mt)) = eval(&trial) {
                let rt_norm = rt.amax();
                if rt_norm < res || rt_norm < cfg.newton_tol {
                    eta = trial;
                    r = rt;
                    mq = mqt;
                    m_space = mt;
                    res = rt_norm;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(GeomError::NoConvergence { iters, residual: res });
        }
    }

    let t_next = exp_so3(&eta) * *t_k;
    let p_next = theta_plus_of(&mq, inertia) + mq.force_right(&m_space) * dt;
    let omega_next = inertia.solve(&t_next.transpose().rotate(&p_next));
    Ok(StepResult {
        t_next,
        omega_next,
        newton_iters: iters,
        residual: res,
    })
}

/// Discrete trajectory produced by [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<RigidBodyState>,
    /// Diagnostics of the step that produced `states[i + 1]`.
    pub steps: Vec<StepDiagnostics>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub newton_iters: usize,
    pub residual: f64,
}

impl Trajectory {
    pub fn energies(&self, inertia: &InertiaTensor) -> Vec<f64> {
        self.states.iter().map(|s| kinetic_energy(s, inertia)).collect()
    }

    pub fn momenta(&self, inertia: &InertiaTensor) -> Vec<Vec3> {
        self.states.iter().map(|s| spatial_momentum(s, inertia)).collect()
    }
}

/// Number of steps covering `t_final` at step `dt`.
pub fn step_count(t_final: f64, dt: f64) -> usize {
    (t_final / dt).round().max(0.0) as usize
}

/// Repeated application of [`vi_step`] from `initial` for `round(t_final/dt)`
/// steps.
pub fn simulate<M>(
    initial: &RigidBodyState,
    inertia: &InertiaTensor,
    mut moment: M,
    cfg: &IntegratorConfig,
    t_final: f64,
) -> Result<Trajectory>
where
    M: FnMut(f64, &RotationMatrix, &Vec3) -> Vec3,
{
    if !(t_final >= 0.0) {
        return Err(GeomError::InvalidParameter {
            field: "t_final",
            constraint: ">= 0",
        });
    }
    let cfg = cfg.validated()?;
    let n = step_count(t_final, cfg.dt);
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut steps = Vec::with_capacity(n);
    times.push(0.0);
    states.push(*initial);
    let mut state = *initial;
    for k in 0..n {
        let t = k as f64 * cfg.dt;
        let step = vi_step(&state.attitude, &state.omega, t, &mut moment, inertia, &cfg)
            .map_err(|e| e.at_step(k, t))?;
        state = RigidBodyState::new(step.t_next, step.omega_next);
        times.push((k + 1) as f64 * cfg.dt);
        states.push(state);
        steps.push(StepDiagnostics {
            newton_iters: step.newton_iters,
            residual: step.residual,
        });
    }
    Ok(Trajectory { times, states, steps })
}

/// Free-body convenience wrapper.
pub fn free_moment(_t: f64, _att: &RotationMatrix, _w: &Vec3) -> Vec3 {
    Vec3::zeros()
}
