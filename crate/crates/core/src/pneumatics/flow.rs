//! Lumped two-circuit plumbing model.
//!
//! The joint circuit is the parallel joint bags; the bottom circuit is the
//! bottom bags plus every residual (dead) volume, which sits on the
//! reservoir side of the transfer valve. Gas content is tracked as
//! `(p + p_atm)·V` in kPa·mm³ and pressures are recovered from it by a
//! monotone inversion each step.

use serde::{Deserialize, Serialize};

use super::airbag::{shape_factor_unchecked, AirbagSpec};
use super::valves::{valve_logic, FlowMode};
use super::{PneumaticError, P_ATM};
use crate::roots::bracketed_root;

/// Orifice constants of the pump/valve network.
///
/// Mass flows are in kPa·mm³/s. The pump delivers
/// `pwm·pump_conductance·pump_reference_volume`; the transfer valve passes
/// `valve_conductance·(p_bottom − p_joint)`; venting removes
/// `exhaust_conductance·p_joint`; leaks remove `leak_*·p` from each circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    /// kPa/s at full PWM into `pump_reference_volume`.
    pub pump_conductance: f64,
    /// mm³
    #[serde(default = "FlowParams::default_reference_volume")]
    pub pump_reference_volume: f64,
    /// mm³/s
    pub valve_conductance: f64,
    /// mm³/s
    pub exhaust_conductance: f64,
    #[serde(default)]
    pub leak_joint: f64,
    #[serde(default)]
    pub leak_bottom: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pump_conductance: 12.0,
            pump_reference_volume: Self::default_reference_volume(),
            valve_conductance: 1.3e5,
            exhaust_conductance: 2.5e5,
            leak_joint: 0.0,
            leak_bottom: 0.0,
        }
    }
}

impl FlowParams {
    fn default_reference_volume() -> f64 {
        250_000.0
    }

    pub fn validate(&self) -> Result<(), PneumaticError> {
        let positive = [
            ("pump_conductance", self.pump_conductance),
            ("pump_reference_volume", self.pump_reference_volume),
            ("valve_conductance", self.valve_conductance),
            ("exhaust_conductance", self.exhaust_conductance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PneumaticError::InvalidFlow(format!("{name}: must be > 0")));
            }
        }
        for (name, v) in [("leak_joint", self.leak_joint), ("leak_bottom", self.leak_bottom)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PneumaticError::InvalidFlow(format!("{name}: must be >= 0")));
            }
        }
        Ok(())
    }

    /// Pump mass rate at the given duty.
    pub fn pump_rate(&self, pwm: f64) -> f64 {
        pwm.clamp(0.0, 1.0) * self.pump_conductance * self.pump_reference_volume
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Circuit {
    Joint,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PneumaticEvent {
    /// A recovered pressure fell outside `[0, p_max]` and was clamped.
    Clamped {
        t: f64,
        circuit: Circuit,
        raw: f64,
        clamped: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PneumaticState {
    pub p_joint: f64,
    pub p_bottom: f64,
    pub sv1: bool,
    pub sv2: bool,
    pub pump_pwm: f64,
    pub p_atm: f64,
    /// Seconds integrated so far.
    pub t: f64,
    /// Bottom-to-joint mass rate during the last step (never negative).
    pub transfer_rate: f64,
    pub events: Vec<PneumaticEvent>,
}

impl Default for PneumaticState {
    fn default() -> Self {
        Self::new(0.0, 0.0)
    }
}

impl PneumaticState {
    pub fn new(p_joint: f64, p_bottom: f64) -> Self {
        Self {
            p_joint,
            p_bottom,
            sv1: false,
            sv2: false,
            pump_pwm: 0.0,
            p_atm: P_ATM,
            t: 0.0,
            transfer_rate: 0.0,
            events: Vec::new(),
        }
    }

    pub fn with_command(mut self, sv1: bool, sv2: bool, pump_pwm: f64) -> Self {
        self.set_command(sv1, sv2, pump_pwm);
        self
    }

    pub fn set_command(&mut self, sv1: bool, sv2: bool, pump_pwm: f64) {
        self.sv1 = sv1;
        self.sv2 = sv2;
        self.pump_pwm = pump_pwm.clamp(0.0, 1.0);
    }

    pub fn mode(&self) -> FlowMode {
        valve_logic(self.sv1, self.sv2, self.pump_pwm > 0.0, self.p_joint, self.p_bottom)
    }

    pub fn validate(&self, joint: &AirbagSpec, bottom: &AirbagSpec) -> Result<(), PneumaticError> {
        joint.check_pressure(self.p_joint)?;
        bottom.check_pressure(self.p_bottom)?;
        if !(0.0..=1.0).contains(&self.pump_pwm) {
            return Err(PneumaticError::InvalidFlow("pump_pwm: must be in [0, 1]".into()));
        }
        if !(self.p_atm > 0.0) {
            return Err(PneumaticError::InvalidFlow("p_atm: must be > 0".into()));
        }
        Ok(())
    }
}

/// Gas volumes of the (joint, bottom) circuits at the given pressures, mm³.
pub fn circuit_volumes(p_joint: f64, p_bottom: f64, joint: &AirbagSpec, bottom: &AirbagSpec) -> (f64, f64) {
    (joint_volume(p_joint, joint), bottom_volume(p_bottom, joint, bottom))
}

fn joint_volume(p: f64, joint: &AirbagSpec) -> f64 {
    joint.count as f64 * joint.chamber_sum() * shape_factor_unchecked(p, joint.p_max)
}

fn dead_volume(joint: &AirbagSpec, bottom: &AirbagSpec) -> f64 {
    joint.count as f64 * joint.v_res + bottom.count as f64 * bottom.v_res
}

fn bottom_volume(p: f64, joint: &AirbagSpec, bottom: &AirbagSpec) -> f64 {
    bottom.count as f64 * bottom.chamber_sum() * shape_factor_unchecked(p, bottom.p_max) + dead_volume(joint, bottom)
}

/// Total gas content `Σ (p + p_atm)·V` of both circuits, kPa·mm³.
pub fn circuit_mass(state: &PneumaticState, joint: &AirbagSpec, bottom: &AirbagSpec) -> f64 {
    let (vj, vb) = circuit_volumes(state.p_joint, state.p_bottom, joint, bottom);
    (state.p_joint + state.p_atm) * vj + (state.p_bottom + state.p_atm) * vb
}

/// Pressure whose content `(p + p_atm)·volume(p)` equals `mass`, clamped to
/// `[0, p_max]`. Returns (pressure, raw estimate if clamped).
fn pressure_from_mass(mass: f64, p_atm: f64, p_max: f64, volume: impl Fn(f64) -> f64) -> (f64, Option<f64>) {
    let content = |p: f64| (p + p_atm) * volume(p);
    let m_lo = content(0.0);
    if mass <= m_lo {
        if mass >= m_lo - 1e-9 * m_lo.max(1.0) {
            return (0.0, None);
        }
        // Linearized estimate of how far below ambient the step overshot.
        let slope = (content(1e-6) - m_lo) / 1e-6;
        return (0.0, Some((mass - m_lo) / slope));
    }
    let m_hi = content(p_max);
    if mass >= m_hi {
        if mass <= m_hi * (1.0 + 1e-12) {
            return (p_max, None);
        }
        let slope = (m_hi - content(p_max - 1e-6)) / 1e-6;
        return (p_max, Some(p_max + (mass - m_hi) / slope));
    }
    let p = bracketed_root(|p| content(p) - mass, 0.0, p_max, 1e-11).unwrap_or(0.0);
    (p, None)
}

/// Advances the plumbing by one explicit step of length `dt`.
///
/// The flow mode is re-evaluated from the current pressures; pump, transfer,
/// vent and leak mass rates are applied for `dt` and the pressures recovered
/// from the new gas content.
pub fn step_pneumatics(
    mut state: PneumaticState,
    flow: &FlowParams,
    joint: &AirbagSpec,
    bottom: &AirbagSpec,
    dt: f64,
) -> PneumaticState {
    let pa = state.p_atm;
    let (pj, pb) = (state.p_joint, state.p_bottom);
    let mode = state.mode();

    let mut dm_j = 0.0;
    let mut dm_b = 0.0;

    let pump = flow.pump_rate(state.pump_pwm);
    if mode.pump_to_bottom() {
        dm_b += pump;
    } else if mode.pump_to_joint() {
        dm_j += pump;
    }

    // Check valve: bottom to joint only.
    let transfer = if mode.transfer_open() && pb > pj {
        flow.valve_conductance * (pb - pj)
    } else {
        0.0
    };
    dm_j += transfer;
    dm_b -= transfer;

    if mode.joint_vents() {
        dm_j -= flow.exhaust_conductance * pj;
    }
    dm_j -= flow.leak_joint * pj;
    dm_b -= flow.leak_bottom * pb;

    let t_next = state.t + dt;
    if dm_j != 0.0 {
        let m = (pj + pa) * joint_volume(pj, joint) + dm_j * dt;
        let (p, raw) = pressure_from_mass(m, pa, joint.p_max, |p| joint_volume(p, joint));
        if let Some(raw) = raw {
            state.events.push(PneumaticEvent::Clamped {
                t: t_next,
                circuit: Circuit::Joint,
                raw,
                clamped: p,
            });
        }
        state.p_joint = p;
    }
    if dm_b != 0.0 {
        let m = (pb + pa) * bottom_volume(pb, joint, bottom) + dm_b * dt;
        let (p, raw) = pressure_from_mass(m, pa, bottom.p_max, |p| bottom_volume(p, joint, bottom));
        if let Some(raw) = raw {
            state.events.push(PneumaticEvent::Clamped {
                t: t_next,
                circuit: Circuit::Bottom,
                raw,
                clamped: p,
            });
        }
        state.p_bottom = p;
    }
    state.transfer_rate = transfer;
    state.t = t_next;
    state
}

/// Time for the joint circuit to reach `p_target` from ambient when the
/// bottom circuit is pre-charged to `p_bottom0` and the pump runs at full
/// duty with both valves off. `None` if not reached within `t_max`.
pub fn joint_fill_time(
    p_bottom0: f64,
    p_target: f64,
    flow: &FlowParams,
    joint: &AirbagSpec,
    bottom: &AirbagSpec,
    dt: f64,
    t_max: f64,
) -> Option<f64> {
    let mut s = PneumaticState::new(0.0, p_bottom0).with_command(false, false, 1.0);
    while s.t < t_max {
        s = step_pneumatics(s, flow, joint, bottom, dt);
        if s.p_joint >= p_target {
            return Some(s.t);
        }
    }
    None
}
