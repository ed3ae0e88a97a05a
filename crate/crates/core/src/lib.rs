//! Geometric rigid-body mechanics: SO(3) calculus, a forced Lie-group
//! variational integrator, backstepping attitude and quadrotor tracking
//! controllers, blade-element rotor aerodynamics and a scenario runner.

// `!(x > 0.0)` style checks are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aero;
pub mod attitude;
pub mod error;
pub mod quadrotor;
pub mod reference;
pub mod rigid_body;
pub mod scenario;
pub mod sim;
pub mod so3;
pub mod variational;

pub use error::{GeomError, Result};
pub use so3::{Mat3, RotationMatrix, Vec3};
