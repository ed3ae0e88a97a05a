//! Rotor aerodynamics from momentum theory combined with blade element
//! theory (rigid, unflapped blades, linear twist, constant chord).
//!
//! Coefficients are normalised by `ρA(ΩR)²` (forces) and `ρA(ΩR)²R`
//! (moments), with `A = πR²` and solidity `σ = N c̄ / (πR)`.

use std::f64::consts::PI;

use crate::error::{GeomError, Result};
use crate::quadrotor::Mixer;
use crate::rigid_body::{BodyWrench, QuadrotorState};
use crate::so3::Vec3;

pub const DEFAULT_AIR_DENSITY: f64 = 1.225;
pub const DEFAULT_LIFT_SLOPE: f64 = 5.7;

/// Stopping rule of the thrust/inflow fixed point.
pub const INFLOW_TOL: f64 = 1e-8;
pub const INFLOW_MAX_ITERS: usize = 100;
const INFLOW_RELAXATION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorGeometry {
    pub blades: u32,
    pub chord: f64,
    pub radius: f64,
    pub lift_slope: f64,
    /// Root collective pitch (rad).
    pub theta0: f64,
    /// Linear twist, pitch at the tip is `theta0 − theta_tw`.
    pub theta_tw: f64,
    /// Mean profile drag coefficient.
    pub cd_bar: f64,
}

impl RotorGeometry {
    pub fn new(
        blades: u32,
        chord: f64,
        radius: f64,
        lift_slope: f64,
        theta0: f64,
        theta_tw: f64,
        cd_bar: f64,
    ) -> Result<Self> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if blades == 0 {
            return Err(GeomError::InvalidParameter { field: "blades", constraint: "at least 1" });
        }
        if !pos(chord) {
            return Err(GeomError::InvalidParameter { field: "chord", constraint: "positive" });
        }
        if !pos(radius) {
            return Err(GeomError::InvalidParameter { field: "radius", constraint: "positive" });
        }
        if !pos(lift_slope) {
            return Err(GeomError::InvalidParameter { field: "lift_slope", constraint: "positive" });
        }
        if !pos(theta0) {
            return Err(GeomError::InvalidParameter { field: "theta0", constraint: "positive" });
        }
        if !theta_tw.is_finite() {
            return Err(GeomError::InvalidParameter { field: "theta_tw", constraint: "finite" });
        }
        if !pos(cd_bar) {
            return Err(GeomError::InvalidParameter { field: "cd_bar", constraint: "positive" });
        }
        let g = Self { blades, chord, radius, lift_slope, theta0, theta_tw, cd_bar };
        if !(g.solidity() < 1.0) {
            return Err(GeomError::InvalidParameter {
                field: "chord",
                constraint: "small enough that the solidity N·c/(π·R) is below 1",
            });
        }
        Ok(g)
    }

    pub fn solidity(&self) -> f64 {
        self.blades as f64 * self.chord / (PI * self.radius)
    }

    pub fn disk_area(&self) -> f64 {
        PI * self.radius * self.radius
    }
}

/// Flow condition seen by one rotor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirState {
    pub rho: f64,
    /// Horizontal speed of the hub (m/s).
    pub v_horiz: f64,
    /// Vertical speed of the hub, positive up (m/s).
    pub z_dot: f64,
    /// Rotor angular speed (rad/s).
    pub omega_rotor: f64,
    /// Load carried by the rotor (N).
    pub weight_supported: f64,
}

/// Loads on one rotor, in its own plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorWrench {
    pub thrust: f64,
    /// In-plane force opposing the edgewise flow.
    pub h_force: f64,
    pub y_force: f64,
    pub torque_shaft: f64,
    /// Moment about the edgewise-flow axis.
    pub roll_moment: f64,
    pub pitch_moment: f64,
}

/// Momentum-theory induced velocity at the disk.
pub fn induced_velocity(air: &AirState, geom: &RotorGeometry) -> f64 {
    let half_v2 = 0.5 * air.v_horiz * air.v_horiz;
    let hover = air.weight_supported / (2.0 * air.rho * geom.disk_area());
    (half_v2 + half_v2.hypot(hover)).sqrt()
}

fn tip_speed(air: &AirState, geom: &RotorGeometry) -> Result<f64> {
    if !(air.omega_rotor > 0.0) {
        return Err(GeomError::ZeroRotorSpeed { omega: air.omega_rotor });
    }
    Ok(air.omega_rotor * geom.radius)
}

/// `λ = (ν₁ − ż)/(ΩR)`
pub fn inflow_ratio(air: &AirState, geom: &RotorGeometry, nu1: f64) -> Result<f64> {
    Ok((nu1 - air.z_dot) / tip_speed(air, geom)?)
}

/// `μ = V/(ΩR)`
pub fn advance_ratio(air: &AirState, geom: &RotorGeometry) -> Result<f64> {
    Ok(air.v_horiz / tip_speed(air, geom)?)
}

fn sigma_a(geom: &RotorGeometry) -> f64 {
    geom.solidity() * geom.lift_slope
}

pub fn thrust_coefficient(geom: &RotorGeometry, lambda: f64, mu: f64) -> f64 {
    let mu2 = mu * mu;
    sigma_a(geom) * ((1.0 / 6.0 + 0.25 * mu2) * geom.theta0 - (1.0 + mu2) * geom.theta_tw / 8.0 - 0.25 * lambda)
}

pub fn hub_force_coefficient(geom: &RotorGeometry, lambda: f64, mu: f64) -> f64 {
    sigma_a(geom)
        * (mu * geom.cd_bar / (4.0 * geom.lift_slope) + 0.25 * lambda * mu * (geom.theta0 - 0.5 * geom.theta_tw))
}

pub fn torque_coefficient(geom: &RotorGeometry, lambda: f64, mu: f64) -> f64 {
    let profile = (1.0 + mu * mu) * geom.cd_bar / (8.0 * geom.lift_slope);
    sigma_a(geom) * (profile + lambda * (geom.theta0 / 6.0 - geom.theta_tw / 8.0 - 0.25 * lambda))
}

pub fn roll_moment_coefficient(geom: &RotorGeometry, lambda: f64, mu: f64) -> f64 {
    -sigma_a(geom) * mu * (geom.theta0 / 6.0 - geom.theta_tw / 8.0 - lambda / 8.0)
}

/// Side force coefficient; vanishes for unflapped blades.
pub fn side_force_coefficient(_geom: &RotorGeometry, _lambda: f64, _mu: f64) -> f64 {
    0.0
}

/// Pitching moment coefficient; vanishes for unflapped blades.
pub fn pitch_moment_coefficient(_geom: &RotorGeometry, _lambda: f64, _mu: f64) -> f64 {
    0.0
}

/// Rotor loads with the induced velocity computed from `air.weight_supported`.
pub fn rotor_wrench(geom: &RotorGeometry, air: &AirState) -> Result<RotorWrench> {
    let u = tip_speed(air, geom)?;
    let nu1 = induced_velocity(air, geom);
    let lambda = (nu1 - air.z_dot) / u;
    let mu = air.v_horiz / u;
    let force_scale = air.rho * geom.disk_area() * u * u;
    let moment_scale = force_scale * geom.radius;
    Ok(RotorWrench {
        thrust: thrust_coefficient(geom, lambda, mu) * force_scale,
        h_force: hub_force_coefficient(geom, lambda, mu) * force_scale,
        y_force: side_force_coefficient(geom, lambda, mu) * force_scale,
        torque_shaft: torque_coefficient(geom, lambda, mu) * moment_scale,
        roll_moment: roll_moment_coefficient(geom, lambda, mu) * moment_scale,
        pitch_moment: pitch_moment_coefficient(geom, lambda, mu) * moment_scale,
    })
}

/// Rotor loads with the supported weight equal to the rotor's own thrust,
/// solved by relaxed fixed-point iteration from `air.weight_supported`.
/// Returns the wrench and the iteration count.
pub fn rotor_wrench_coupled(geom: &RotorGeometry, air: &AirState) -> Result<(RotorWrench, usize)> {
    let mut state = *air;
    let mut change = f64::INFINITY;
    for iter in 1..=INFLOW_MAX_ITERS {
        let w = rotor_wrench(geom, &state)?;
        change = w.thrust - state.weight_supported;
        if change.abs() <= INFLOW_TOL * state.weight_supported.abs().max(1.0) {
            return Ok((w, iter));
        }
        // the momentum relation needs a non-negative load
        state.weight_supported = (state.weight_supported + INFLOW_RELAXATION * change).max(0.0);
    }
    Err(GeomError::InflowNoConvergence { iters: INFLOW_MAX_ITERS, change: change.abs() })
}

/// Rotor speed that produces `thrust` in static hover, i.e. with the
/// induced velocity `√(T/2ρA)` and no climb or edgewise flow.
pub fn hover_rotor_speed(geom: &RotorGeometry, rho: f64, thrust: f64) -> Result<f64> {
    if !(thrust > 0.0) {
        return Err(GeomError::ZeroRotorSpeed { omega: 0.0 });
    }
    // T = k (c u² − s u / 4) with u = ΩR
    let k = sigma_a(geom) * rho * geom.disk_area();
    let c = geom.theta0 / 6.0 - geom.theta_tw / 8.0;
    if !(c > 0.0) {
        return Err(GeomError::InvalidParameter {
            field: "theta0",
            constraint: "large enough that theta0/6 − theta_tw/8 is positive",
        });
    }
    let s = (thrust / (2.0 * rho * geom.disk_area())).sqrt();
    let b = 0.25 * k * s;
    let u = (b + (b * b + 4.0 * k * c * thrust).sqrt()) / (2.0 * k * c);
    Ok(u / geom.radius)
}

/// Reaction torque per unit thrust of a rotor in static hover at `thrust`.
pub fn hover_torque_ratio(geom: &RotorGeometry, rho: f64, thrust: f64) -> Result<f64> {
    let omega = hover_rotor_speed(geom, rho, thrust)?;
    let air = AirState {
        rho,
        v_horiz: 0.0,
        z_dot: 0.0,
        omega_rotor: omega,
        weight_supported: thrust,
    };
    let w = rotor_wrench(geom, &air)?;
    Ok(w.torque_shaft / w.thrust)
}

/// How the induced velocity is computed inside the vehicle model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InflowModel {
    /// Supported weight equals the rotor's own thrust (fixed point).
    #[default]
    Coupled,
    /// Supported weight fixed at the rotor's commanded thrust.
    Static,
}

/// Four identical rotors on a plus-configuration frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleAero {
    pub geometry: RotorGeometry,
    pub rho: f64,
    pub mixer: Mixer,
    pub inflow: InflowModel,
}

/// Per-tick aerodynamic bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroSample {
    /// Correction to the ideal actuator wrench, body frame.
    pub extra: BodyWrench,
    pub rotor_speeds: [f64; 4],
    pub rotor_thrusts: [f64; 4],
    pub inflow_iters: usize,
}

impl VehicleAero {
    /// Builds the model with the mixer torque ratio taken from static hover
    /// at a quarter of `weight`.
    pub fn new(geometry: RotorGeometry, rho: f64, arm: f64, weight: f64, inflow: InflowModel) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(GeomError::InvalidParameter { field: "rho", constraint: "positive" });
        }
        let ratio = hover_torque_ratio(&geometry, rho, 0.25 * weight)?;
        Ok(Self {
            geometry,
            rho,
            mixer: Mixer::new(arm, ratio)?,
            inflow,
        })
    }

    /// Rotor speeds are set from the commanded per-rotor thrusts by static
    /// hover inversion; the rotors are then evaluated in the actual flow and
    /// the difference from the commanded wrench is returned.
    pub fn sample(&self, state: &QuadrotorState, thrust: f64, torque: &Vec3) -> Result<AeroSample> {
        let commanded = self.mixer.allocate(thrust, torque);
        let positions = self.mixer.rotor_positions();
        let rt = state.attitude.transpose();
        let mut force = Vec3::zeros();
        let mut moment = Vec3::zeros();
        let mut speeds = [0.0; 4];
        let mut actual = [0.0; 4];
        let mut iters = 0;
        for i in 0..4 {
            let omega = hover_rotor_speed(&self.geometry, self.rho, commanded[i])?;
            let hub_velocity = state.velocity + state.attitude.rotate(&state.omega.cross(&positions[i]));
            let air = AirState {
                rho: self.rho,
                v_horiz: hub_velocity.x.hypot(hub_velocity.y),
                z_dot: hub_velocity.z,
                omega_rotor: omega,
                weight_supported: commanded[i],
            };
            let w = match self.inflow {
                InflowModel::Coupled => {
                    let (w, n) = rotor_wrench_coupled(&self.geometry, &air)?;
                    iters += n;
                    w
                }
                InflowModel::Static => rotor_wrench(&self.geometry, &air)?,
            };
            // edgewise direction: hub velocity projected on the rotor plane
            let vb = rt.rotate(&hub_velocity);
            let edge = Vec3::new(vb.x, vb.y, 0.0);
            let edge_dir = if edge.norm() > 1e-12 { edge / edge.norm() } else { Vec3::zeros() };
            let spin = Mixer::SPIN[i];

            let f_i = Vec3::new(0.0, 0.0, w.thrust - commanded[i]) - edge_dir * w.h_force;
            let reaction = spin * (w.torque_shaft - self.mixer.torque_ratio * commanded[i]);
            // rotation sense is opposite to the reaction torque
            let m_i = positions[i].cross(&f_i) + Vec3::new(0.0, 0.0, reaction) - edge_dir * (spin * w.roll_moment);
            force += f_i;
            moment += m_i;
            speeds[i] = omega;
            actual[i] = w.thrust;
        }
        Ok(AeroSample {
            extra: BodyWrench { force_body: force, moment_body: moment },
            rotor_speeds: speeds,
            rotor_thrusts: actual,
            inflow_iters: iters,
        })
    }
}
