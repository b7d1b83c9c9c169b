//! Perching state machine.
//!
//! Search → Approach → Reach → Perch → Deperch → Search. Every transition
//! except Approach → Reach is gated on a pressure predicate, and the
//! valve/pump command of each phase is read from [`SCHEDULE`].

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::flight::{FlightSetpoint, RigidBodyState};
use crate::pneumatics::{pwm_controller, PneumaticState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionThresholds {
    pub p_bottom_approach: f64,
    pub p_bottom_reach: f64,
    pub p_joint_rigidity: f64,
    pub p_joint_max: f64,
    pub d_goal: f64,
    pub pump_fallback_delay: f64,
    pub p_joint_refill: f64,
    pub p_bottom_refill: f64,
    /// Bottom refill stops this far above `p_bottom_refill`.
    pub refill_band: f64,
    /// Joint pressure at which the arm counts as released.
    pub p_joint_released: f64,
    /// Altitude tolerance for leaving Deperch, m.
    pub altitude_tolerance: f64,
}

impl Default for MissionThresholds {
    fn default() -> Self {
        Self {
            p_bottom_approach: 20.0,
            p_bottom_reach: 40.0,
            p_joint_rigidity: 19.0,
            p_joint_max: 50.0,
            d_goal: 0.5,
            pump_fallback_delay: 1.5,
            p_joint_refill: 40.0,
            p_bottom_refill: 20.0,
            refill_band: 1.0,
            p_joint_released: 1.0,
            altitude_tolerance: 0.1,
        }
    }
}

impl MissionThresholds {
    pub fn validate(&self, joint_p_max: f64, bottom_p_max: f64) -> Result<(), String> {
        let t = self;
        if !(t.p_joint_rigidity > 0.0 && t.p_joint_rigidity < t.p_joint_max) {
            return Err("p_joint_rigidity: need 0 < p_joint_rigidity < p_joint_max".into());
        }
        if t.p_joint_max > joint_p_max {
            return Err(format!(
                "p_joint_max: must not exceed the joint airbag p_max ({joint_p_max})"
            ));
        }
        if !(t.p_joint_refill > 0.0 && t.p_joint_refill < t.p_joint_max) {
            return Err("p_joint_refill: need 0 < p_joint_refill < p_joint_max".into());
        }
        for (name, v) in [
            ("p_bottom_approach", t.p_bottom_approach),
            ("p_bottom_reach", t.p_bottom_reach),
            ("p_bottom_refill", t.p_bottom_refill),
        ] {
            if !(v >= 0.0 && v <= bottom_p_max) {
                return Err(format!("{name}: must be in [0, {bottom_p_max}]"));
            }
        }
        if t.p_bottom_refill + t.refill_band > bottom_p_max {
            return Err("refill_band: p_bottom_refill + refill_band exceeds the bottom p_max".into());
        }
        for (name, v) in [
            ("d_goal", t.d_goal),
            ("pump_fallback_delay", t.pump_fallback_delay),
            ("refill_band", t.refill_band),
            ("p_joint_released", t.p_joint_released),
            ("altitude_tolerance", t.altitude_tolerance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name}: must be >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproachGains {
    /// 1/s
    pub kp: f64,
    pub kd: f64,
    /// m/s
    pub max_speed: f64,
    /// A depth jump larger than this between ticks is an outlier, m.
    pub outlier_jump: f64,
    /// Pump law used while holding the bottom setpoint.
    pub pwm_kp: f64,
    pub pwm_min: f64,
}

impl Default for ApproachGains {
    fn default() -> Self {
        Self {
            kp: 0.5,
            kd: 0.1,
            max_speed: 0.6,
            outlier_jump: 0.5,
            pwm_kp: 0.05,
            pwm_min: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReachStep {
    Pressurize,
    Transfer,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PerchStep {
    Inflate,
    Hold,
    RefillBottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Phase {
    Search,
    Approach,
    Reach(ReachStep),
    Perch(PerchStep),
    Deperch,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Search => "Search",
            Phase::Approach => "Approach",
            Phase::Reach(_) => "Reach",
            Phase::Perch(_) => "Perch",
            Phase::Deperch => "Deperch",
        }
    }

    /// Position in the cycle; consecutive phases differ by one (mod 5).
    pub fn ordinal(&self) -> usize {
        match self {
            Phase::Search => 0,
            Phase::Approach => 1,
            Phase::Reach(_) => 2,
            Phase::Perch(_) => 3,
            Phase::Deperch => 4,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Reach(s) => write!(f, "Reach/{s:?}"),
            Phase::Perch(s) => write!(f, "Perch/{s:?}"),
            p => f.write_str(p.name()),
        }
    }
}

/// Pump setting as written in the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PumpSetting {
    Off,
    On,
    OnNeeded,
    OnMaximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub state: &'static str,
    pub pump: PumpSetting,
    pub valve1: bool,
    pub valve2: bool,
}

impl ScheduleRow {
    /// Valve 1 switches the joint line (SV2); valve 2 routes the pump (SV1).
    pub fn sv1(&self) -> bool {
        self.valve2
    }

    pub fn sv2(&self) -> bool {
        self.valve1
    }
}

/// Per-state solenoid and pump schedule.
pub const SCHEDULE: [ScheduleRow; 6] = [
    ScheduleRow {
        state: "Approach",
        pump: PumpSetting::OnNeeded,
        valve1: true,
        valve2: true,
    },
    ScheduleRow {
        state: "Reach",
        pump: PumpSetting::On,
        valve1: true,
        valve2: true,
    },
    ScheduleRow {
        state: "Reach",
        pump: PumpSetting::Off,
        valve1: false,
        valve2: false,
    },
    ScheduleRow {
        state: "Perch",
        pump: PumpSetting::OnMaximum,
        valve1: false,
        valve2: false,
    },
    ScheduleRow {
        state: "Perch",
        pump: PumpSetting::Off,
        valve1: false,
        valve2: false,
    },
    ScheduleRow {
        state: "Deperch",
        pump: PumpSetting::Off,
        valve1: false,
        valve2: true,
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CommandSource {
    /// Index into [`SCHEDULE`].
    Table(usize),
    /// Search: pump off, joint line vented, bottom held.
    Idle,
    /// Transfer did not stiffen the arm in time; pump assists.
    ReachFallback,
    /// Bottom reservoir topped up while perched.
    BottomRefill,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Command {
    pub sv1: bool,
    pub sv2: bool,
    pub pump_pwm: f64,
    pub propellers: bool,
    pub source: CommandSource,
}

impl Command {
    pub fn is_off_table(&self) -> bool {
        matches!(self.source, CommandSource::ReachFallback | CommandSource::BottomRefill)
    }
}

/// Row of [`SCHEDULE`] that governs a phase.
pub fn schedule_row(phase: Phase) -> Option<usize> {
    match phase {
        Phase::Search => None,
        Phase::Approach => Some(0),
        Phase::Reach(ReachStep::Pressurize) => Some(1),
        Phase::Reach(ReachStep::Transfer) => Some(2),
        Phase::Reach(ReachStep::Fallback) => None,
        Phase::Perch(PerchStep::Inflate) => Some(3),
        Phase::Perch(PerchStep::Hold) => Some(4),
        Phase::Perch(PerchStep::RefillBottom) => None,
        Phase::Deperch => Some(5),
    }
}

/// A depth reading of the tracked person.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DistanceReading {
    Valid(f64),
    Dropout,
    Outlier(f64),
}

/// Approach speed toward the person. Dropouts stop the robot; outliers
/// fall back to the previous valid depth.
pub fn approach_velocity(
    reading: DistanceReading,
    d_prev: Option<f64>,
    d_goal: f64,
    gains: &ApproachGains,
    dt: f64,
) -> f64 {
    let (d, rate) = match (reading, d_prev) {
        (DistanceReading::Dropout, _) => return 0.0,
        (DistanceReading::Outlier(_), None) => return 0.0,
        (DistanceReading::Outlier(_), Some(p)) => (p, 0.0),
        (DistanceReading::Valid(d), Some(p)) if dt > 0.0 => (d, (d - p) / dt),
        (DistanceReading::Valid(d), _) => (d, 0.0),
    };
    let v = gains.kp * (d - d_goal) + gains.kd * rate;
    v.clamp(-gains.max_speed, gains.max_speed)
}

/// What the mission sees of the person this tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanObservation {
    /// `None` before anyone is detected.
    pub reading: Option<DistanceReading>,
    pub arm_presented: bool,
    pub takeoff_request: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionEvent {
    pub t: f64,
    pub from: String,
    pub to: String,
    pub p_joint: f64,
    pub p_bottom: f64,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionState {
    pub phase: Phase,
    /// Seconds since the top-level phase was entered.
    pub phase_timer: f64,
    /// Seconds since the current sub-step was entered.
    pub step_timer: f64,
    pub t: f64,
    pub events: Vec<MissionEvent>,
    /// Hover reference for phases that hold position.
    pub hover_ref: Vector3<f64>,
    /// Altitude the robot returns to after perching.
    pub flight_altitude: f64,
    /// Last valid depth reading.
    pub d_prev: Option<f64>,
}

impl MissionState {
    pub fn new(start: Vector3<f64>) -> Self {
        Self {
            phase: Phase::Search,
            phase_timer: 0.0,
            step_timer: 0.0,
            t: 0.0,
            events: Vec::new(),
            hover_ref: start,
            flight_altitude: start.z,
            d_prev: None,
        }
    }

    fn go(&mut self, to: Phase, pneu: &PneumaticState, reason: &'static str) {
        self.events.push(MissionEvent {
            t: self.t,
            from: self.phase.to_string(),
            to: to.to_string(),
            p_joint: pneu.p_joint,
            p_bottom: pneu.p_bottom,
            reason,
        });
        if to.ordinal() != self.phase.ordinal() {
            self.phase_timer = 0.0;
        }
        self.step_timer = 0.0;
        self.phase = to;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsmOutput {
    pub command: Command,
    pub setpoint: FlightSetpoint,
}

fn table_command(row: usize, pump_pwm: f64, propellers: bool) -> Command {
    let r = &SCHEDULE[row];
    Command {
        sv1: r.sv1(),
        sv2: r.sv2(),
        pump_pwm,
        propellers,
        source: CommandSource::Table(row),
    }
}

/// Advances the mission by one tick: evaluates the transition predicates
/// for the current phase, then emits the command of the (possibly new)
/// phase.
pub fn fsm_step(
    m: &mut MissionState,
    pneu: &PneumaticState,
    body: &RigidBodyState,
    human: &HumanObservation,
    th: &MissionThresholds,
    gains: &ApproachGains,
    dt: f64,
) -> FsmOutput {
    let (pj, pb) = (pneu.p_joint, pneu.p_bottom);
    let d_before = m.d_prev;

    // Outlier screening against the last valid depth.
    let reading = human.reading.map(|r| match (r, m.d_prev) {
        (DistanceReading::Valid(d), Some(p)) if (d - p).abs() > gains.outlier_jump => DistanceReading::Outlier(d),
        _ => r,
    });

    match m.phase {
        Phase::Search => {
            if matches!(reading, Some(DistanceReading::Valid(_))) {
                m.hover_ref = body.r;
                m.flight_altitude = body.r.z;
                m.go(Phase::Approach, pneu, "person detected");
            }
        }
        Phase::Approach => {
            let close = matches!(reading, Some(DistanceReading::Valid(d)) if d <= th.d_goal);
            if close && human.arm_presented {
                m.hover_ref = body.r;
                m.flight_altitude = body.r.z;
                m.go(
                    Phase::Reach(ReachStep::Pressurize),
                    pneu,
                    "arm presented within goal distance",
                );
            }
        }
        Phase::Reach(step) => {
            if pj >= th.p_joint_rigidity && step != ReachStep::Pressurize {
                m.go(
                    Phase::Perch(PerchStep::Inflate),
                    pneu,
                    "joint pressure reached rigidity threshold",
                );
            } else {
                match step {
                    ReachStep::Pressurize if pb >= th.p_bottom_reach => {
                        m.go(Phase::Reach(ReachStep::Transfer), pneu, "bottom pre-charged");
                    }
                    ReachStep::Transfer if m.step_timer >= th.pump_fallback_delay && pj < th.p_joint_rigidity => {
                        m.go(
                            Phase::Reach(ReachStep::Fallback),
                            pneu,
                            "transfer too slow, pump assists",
                        );
                    }
                    _ => {}
                }
            }
        }
        Phase::Perch(step) => match step {
            PerchStep::Inflate if pj >= th.p_joint_max => {
                m.go(Phase::Perch(PerchStep::Hold), pneu, "joint fully pressurized");
            }
            PerchStep::Hold => {
                if pj < th.p_joint_refill {
                    m.go(Phase::Perch(PerchStep::Inflate), pneu, "joint below refill threshold");
                } else if pb < th.p_bottom_refill {
                    m.go(
                        Phase::Perch(PerchStep::RefillBottom),
                        pneu,
                        "bottom below refill threshold",
                    );
                } else if human.takeoff_request {
                    m.go(Phase::Deperch, pneu, "takeoff requested with arm pressurized");
                }
            }
            PerchStep::RefillBottom => {
                if pj < th.p_joint_refill {
                    m.go(Phase::Perch(PerchStep::Inflate), pneu, "joint below refill threshold");
                } else if pb >= th.p_bottom_refill + th.refill_band {
                    m.go(Phase::Perch(PerchStep::Hold), pneu, "bottom refilled");
                }
            }
            _ => {}
        },
        Phase::Deperch => {
            let z_err = (body.r.z - m.flight_altitude).abs();
            if pj <= th.p_joint_released && z_err < th.altitude_tolerance {
                m.hover_ref = body.r;
                m.go(Phase::Search, pneu, "joints vented and altitude recovered");
            }
        }
    }

    if let Some(DistanceReading::Valid(d)) = reading {
        m.d_prev = Some(d);
    }

    let hold = FlightSetpoint::hold(m.hover_ref);
    let out = match m.phase {
        Phase::Search => FsmOutput {
            command: Command {
                sv1: true,
                sv2: true,
                pump_pwm: 0.0,
                propellers: true,
                source: CommandSource::Idle,
            },
            setpoint: hold,
        },
        Phase::Approach => {
            let pwm = pwm_controller(th.p_bottom_approach, pb, gains.pwm_kp, gains.pwm_min);
            let v = match reading {
                Some(r) => approach_velocity(r, d_before, th.d_goal, gains, dt),
                None => 0.0,
            };
            m.hover_ref.x += v * dt;
            m.hover_ref.z = m.flight_altitude;
            FsmOutput {
                command: table_command(0, pwm, true),
                setpoint: FlightSetpoint {
                    r: m.hover_ref,
                    v: Vector3::new(v, 0.0, 0.0),
                    psi: 0.0,
                },
            }
        }
        Phase::Reach(ReachStep::Pressurize) => FsmOutput {
            command: table_command(1, 1.0, true),
            setpoint: hold,
        },
        Phase::Reach(ReachStep::Transfer) => FsmOutput {
            command: table_command(2, 0.0, true),
            setpoint: hold,
        },
        Phase::Reach(ReachStep::Fallback) => FsmOutput {
            command: Command {
                sv1: false,
                sv2: false,
                pump_pwm: 1.0,
                propellers: true,
                source: CommandSource::ReachFallback,
            },
            setpoint: hold,
        },
        Phase::Perch(PerchStep::Inflate) => FsmOutput {
            command: table_command(3, 1.0, false),
            setpoint: hold,
        },
        Phase::Perch(PerchStep::Hold) => FsmOutput {
            command: table_command(4, 0.0, false),
            setpoint: hold,
        },
        Phase::Perch(PerchStep::RefillBottom) => FsmOutput {
            command: Command {
                sv1: true,
                sv2: false,
                pump_pwm: 1.0,
                propellers: false,
                source: CommandSource::BottomRefill,
            },
            setpoint: hold,
        },
        Phase::Deperch => {
            let mut r = m.hover_ref;
            r.z = m.flight_altitude;
            FsmOutput {
                command: table_command(5, 0.0, true),
                setpoint: FlightSetpoint::hold(r),
            }
        }
    };
    m.t += dt;
    m.phase_timer += dt;
    m.step_timer += dt;
    out
}
