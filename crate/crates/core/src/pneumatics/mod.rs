//! Airbag volumes, reservoir equalization and valve/pump plumbing.
//!
//! Units: gauge pressure in kPa, lengths in mm, volumes in mm³.

mod airbag;
mod equalize;
mod flow;
mod pwm;
mod valves;

pub use airbag::{airbag_volume, shape_factor, AirbagSpec, VolumePolynomial};
pub use equalize::{
    equalization_residual, equalized_pressure_forward, initial_pressure_cubic, initial_pressure_for_target,
    InitialPressure,
};
pub use flow::{
    circuit_mass, circuit_volumes, joint_fill_time, step_pneumatics, Circuit, FlowParams, PneumaticEvent,
    PneumaticState,
};
pub use pwm::pwm_controller;
pub use valves::{
    flow_mode, render_truth_table, truth_table, valve_logic, BottomAction, FlowMode, HoldKind, JointAction, Ordering,
    TruthTableRow,
};

/// Atmospheric pressure, kPa absolute.
pub const P_ATM: f64 = 101.3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PneumaticError {
    #[error("pressure {value} kPa outside [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },
    #[error("invalid airbag spec: {0}")]
    InvalidSpec(String),
    #[error("invalid flow parameters: {0}")]
    InvalidFlow(String),
    #[error("no sign change on [{lo}, {hi}]: residuals {f_lo} and {f_hi}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("no pre-charge in range reaches {target} kPa (real roots {roots:?})")]
    Infeasible { target: f64, roots: Vec<f64> },
    #[error("several pre-charge pressures in range: {candidates:?}")]
    Ambiguous { candidates: Vec<f64> },
}
