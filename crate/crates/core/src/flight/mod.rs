//! Rigid quadrotor plant and its cascade controller.

mod control;
mod dynamics;
pub mod riccati;
mod rotor;

pub use control::{
    attitude_model, force_to_attitude, lqi_attitude_control, pid_position_control, pid_world_force, synthesize_lqi,
    ControlError, ControlOutput, ControllerGains, FlightController, FlightSetpoint, LqiDesign, ThrustLimits,
};
pub use dynamics::{dynamics_step, wrap_angle, BodyParams, RigidBodyState};
pub use riccati::{solve_riccati, RiccatiError, RiccatiSolution};
pub use rotor::{allocation_matrix, wrench, x_layout, Allocation, RotorConfig};
