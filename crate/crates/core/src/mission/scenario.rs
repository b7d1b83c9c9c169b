//! Scripted end-to-end runs: mission, pneumatics, arm and flight advanced
//! together on one clock.

use std::path::Path;

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::fsm::{
    fsm_step, schedule_row, CommandSource, DistanceReading, HumanObservation, MissionEvent, MissionState,
    MissionThresholds, PerchStep, Phase, SCHEDULE,
};
use super::trace::{Summary, TraceRow};
use crate::arm::arm_configuration;
use crate::config::{validate_dt, ConfigError, RobotConfig};
use crate::flight::{
    allocation_matrix, dynamics_step, BodyParams, ControlError, FlightController, RigidBodyState, ThrustLimits,
};
use crate::pneumatics::{step_pneumatics, PneumaticState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanSample {
    pub t: f64,
    /// Depth to the person, m; `null` marks a dropout.
    pub d: Option<f64>,
    #[serde(default)]
    pub arm_presented: bool,
    #[serde(default)]
    pub outlier: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConditions {
    pub position: [f64; 3],
    pub euler: [f64; 3],
    pub p_joint: f64,
    pub p_bottom: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 1.0],
            euler: [0.0; 3],
            p_joint: 0.0,
            p_bottom: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakWindow {
    pub t_start: f64,
    #[serde(default)]
    pub t_end: Option<f64>,
    /// mm³/s
    #[serde(default)]
    pub joint: f64,
    #[serde(default)]
    pub bottom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorTilt {
    pub rotor: usize,
    /// rad, away from the body centre.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// s
    pub duration: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub initial: InitialConditions,
    #[serde(default)]
    pub human: Vec<HumanSample>,
    #[serde(default)]
    pub takeoff_at: Option<f64>,
    /// Height of the perch below the flight altitude, m.
    #[serde(default = "default_drop")]
    pub perch_drop: f64,
    #[serde(default)]
    pub leaks: Vec<LeakWindow>,
    #[serde(default)]
    pub rotor_tilt: Option<RotorTilt>,
    /// The pump stops delivering air from this time on.
    #[serde(default)]
    pub pump_fault_at: Option<f64>,
    /// Replaces the configured mission thresholds.
    #[serde(default)]
    pub thresholds: Option<MissionThresholds>,
    /// Resisting torque at each hinge, N·m.
    #[serde(default)]
    pub hinge_loads: Option<Vec<f64>>,
    /// Record every n-th step.
    #[serde(default = "default_every")]
    pub trace_every: usize,
}

fn default_drop() -> f64 {
    0.1
}

fn default_every() -> usize {
    10
}

impl Scenario {
    pub fn empty(name: &str) -> Self {
        serde_json::from_str(&format!(r#"{{"name": "{name}", "duration": 0}}"#)).expect("literal scenario")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let s: Self = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: String, message: &str| {
            Err(ConfigError::Invalid {
                field,
                message: message.into(),
            })
        };
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad("scenario.duration".into(), "must be >= 0");
        }
        if let Some(dt) = self.dt {
            validate_dt(dt).map_err(|e| match e {
                ConfigError::Invalid { message, .. } => ConfigError::Invalid {
                    field: "scenario.dt".into(),
                    message,
                },
                other => other,
            })?;
        }
        if self.trace_every == 0 {
            return bad("scenario.trace_every".into(), "must be >= 1");
        }
        if !(self.perch_drop >= 0.0) {
            return bad("scenario.perch_drop".into(), "must be >= 0");
        }
        for (i, w) in self.human.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return bad(format!("scenario.human[{}].t", i + 1), "times must increase");
            }
        }
        for (i, s) in self.human.iter().enumerate() {
            if let Some(d) = s.d {
                if !(d >= 0.0) {
                    return bad(format!("scenario.human[{i}].d"), "must be >= 0");
                }
            }
        }
        for (i, l) in self.leaks.iter().enumerate() {
            if !(l.joint >= 0.0 && l.bottom >= 0.0) {
                return bad(format!("scenario.leaks[{i}]"), "leak conductances must be >= 0");
            }
        }
        if let Some(t) = &self.rotor_tilt {
            if t.rotor >= 4 {
                return bad("scenario.rotor_tilt.rotor".into(), "must be 0..=3");
            }
        }
        Ok(())
    }

    /// Observation at time `t`: the latest sample at or before `t`, with
    /// depth interpolated toward the next valid sample.
    pub fn observe(&self, t: f64) -> HumanObservation {
        let takeoff_request = self.takeoff_at.is_some_and(|ta| t >= ta);
        let idx = self.human.iter().rposition(|s| s.t <= t);
        let Some(i) = idx else {
            return HumanObservation {
                reading: None,
                arm_presented: false,
                takeoff_request,
            };
        };
        let s = &self.human[i];
        let reading = match s.d {
            None => DistanceReading::Dropout,
            Some(d) if s.outlier => DistanceReading::Outlier(d),
            Some(d) => {
                let next = self.human.get(i + 1).filter(|n| !n.outlier);
                match next.and_then(|n| n.d.map(|dn| (n.t, dn))) {
                    Some((tn, dn)) => DistanceReading::Valid(d + (dn - d) * (t - s.t) / (tn - s.t)),
                    None => DistanceReading::Valid(d),
                }
            }
        };
        HumanObservation {
            reading: Some(reading),
            arm_presented: s.arm_presented,
            takeoff_request,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("flight control at t={t}: {source}")]
    Control { t: f64, source: ControlError },
    #[error("non-finite state at t={0}")]
    NonFinite(f64),
}

#[derive(Debug)]
pub struct ScenarioRun {
    pub trace: Vec<TraceRow>,
    pub summary: Summary,
    /// Set when a module failed; the trace stops there.
    pub error: Option<SimError>,
}

impl ScenarioRun {
    pub fn invariants_held(&self) -> bool {
        self.error.is_none() && self.summary.invariant_violations.is_empty()
    }
}

/// Runs a scenario to completion (or to the first module failure).
pub fn run_scenario(cfg: &RobotConfig, sc: &Scenario, dt_override: Option<f64>) -> ScenarioRun {
    let dt = dt_override.or(sc.dt).unwrap_or(cfg.flight.dt);
    let mut summary = Summary::new(&sc.name, sc.duration, dt);
    let mut trace = Vec::new();
    let fail = |mut summary: Summary, trace, e: SimError| {
        summary.error = Some(e.to_string());
        ScenarioRun {
            trace,
            summary,
            error: Some(e),
        }
    };

    if let Err(e) = cfg.validate().and_then(|_| sc.validate()).and_then(|_| validate_dt(dt)) {
        return fail(summary, trace, e.into());
    }
    let thresholds = sc.thresholds.clone().unwrap_or_else(|| cfg.mission.thresholds.clone());
    let pc = &cfg.pneumatics;
    if let Err(msg) = thresholds.validate(pc.joint.p_max, pc.bottom.p_max) {
        let e = ConfigError::Invalid {
            field: "scenario.thresholds".into(),
            message: msg,
        };
        return fail(summary, trace, e.into());
    }
    let geom = &cfg.arm.geometry;
    let loads = sc
        .hinge_loads
        .clone()
        .unwrap_or_else(|| vec![0.0; geom.hinge_limits.len()]);

    let mass = cfg.mass.total();
    let g = cfg.mass.g;
    let inertia = cfg.flight.inertia();
    let q_nominal = allocation_matrix(&cfg.flight.rotors);
    let mut plant_rotors = cfg.flight.rotors.clone();
    if let Some(tilt) = &sc.rotor_tilt {
        plant_rotors[tilt.rotor] = plant_rotors[tilt.rotor].tilted_outward(tilt.angle);
    }
    let plant = BodyParams {
        mass,
        inertia,
        g,
        rotors: plant_rotors,
    };
    let limits = ThrustLimits {
        min: cfg.thrust_floor(),
        max: cfg.flight.thrust_max,
    };
    let mut ctrl = match FlightController::new(cfg.flight.gains.clone(), limits, mass, g, inertia, &q_nominal) {
        Ok(c) => c,
        Err(e) => return fail(summary, trace, SimError::Control { t: 0.0, source: e }),
    };

    let ic = &sc.initial;
    let mut body = RigidBodyState::at(Vector3::from(ic.position));
    body.euler = Vector3::from(ic.euler);
    let mut pneu = PneumaticState::new(ic.p_joint, ic.p_bottom);
    pneu.p_atm = pc.p_atm;
    let mut mission = MissionState::new(body.r);
    let mut perch_plane: Option<f64> = None;
    let mut propellers_were_on = true;

    let steps = (sc.duration / dt).round() as usize;
    summary.steps = steps;
    let mut last_phase = mission.phase;
    summary.enter_phase(0.0, last_phase);

    for k in 0..steps {
        let t = k as f64 * dt;
        let obs = sc.observe(t);
        let out = fsm_step(&mut mission, &pneu, &body, &obs, &thresholds, &cfg.mission.approach, dt);
        let cmd = out.command;

        check_command(mission.phase, cmd.source, cmd.sv1, cmd.sv2, &mut summary, t);
        for ev in mission.events.iter().skip(summary.transitions.len()) {
            check_transition(ev, &thresholds, &mut summary);
            summary.transitions.push(ev.clone());
        }
        if mission.phase.ordinal() != last_phase.ordinal() {
            summary.enter_phase(t, mission.phase);
        }
        if mission.phase != last_phase {
            if let Phase::Perch(_) = mission.phase {
                if perch_plane.is_none() {
                    perch_plane = Some(mission.flight_altitude - sc.perch_drop);
                }
            }
            if mission.phase == Phase::Search {
                perch_plane = None;
            }
            last_phase = mission.phase;
        }

        // Pneumatics.
        let pump_ok = sc.pump_fault_at.is_none_or(|tf| t < tf);
        pneu.set_command(cmd.sv1, cmd.sv2, if pump_ok { cmd.pump_pwm } else { 0.0 });
        let mut flow = pc.flow.clone();
        for w in &sc.leaks {
            if t >= w.t_start && w.t_end.is_none_or(|te| t < te) {
                flow.leak_joint += w.joint;
                flow.leak_bottom += w.bottom;
            }
        }
        let mode = pneu.mode();
        let n_events = pneu.events.len();
        pneu = step_pneumatics(pneu, &flow, &pc.joint, &pc.bottom, dt);
        summary.pneumatic_clamps += pneu.events.len() - n_events;
        if mission.phase == Phase::Perch(PerchStep::Hold) {
            summary.hold_energy += (cmd.pump_pwm + cmd.sv1 as u8 as f64 + cmd.sv2 as u8 as f64) * dt;
            summary.hold_time += dt;
        }

        // Flight.
        let thrusts = if cmd.propellers {
            if !propellers_were_on {
                ctrl.reset();
            }
            match ctrl.update(&body, &out.setpoint, dt) {
                Ok(o) => {
                    let e = (body.euler - o.attitude_des).xy().abs().max();
                    summary.max_attitude_error = summary.max_attitude_error.max(e);
                    o.thrusts
                }
                Err(e) => return fail(summary, trace, SimError::Control { t, source: e }),
            }
        } else {
            Vector4::zeros()
        };
        propellers_were_on = cmd.propellers;
        body = dynamics_step(&body, &thrusts, &plant, dt);
        if let Some(plane) = perch_plane {
            if body.r.z < plane {
                body.r.z = plane;
                body.v = Vector3::zeros();
                body.omega = Vector3::zeros();
                body.euler.x = 0.0;
                body.euler.y = 0.0;
            }
        }
        if cmd.propellers && !body.near_hover() {
            summary.near_hover_violations += 1;
        }
        let tn = t + dt;
        if !(body.r.iter().chain(body.euler.iter()).all(|v| v.is_finite()) && pneu.p_joint.is_finite()) {
            return fail(summary, trace, SimError::NonFinite(tn));
        }
        summary.track_recovery(tn, &body, cmd.propellers);
        summary.track_phase_pressures(mission.phase, &pneu);

        if (k + 1) % sc.trace_every == 0 || k + 1 == steps {
            let (hinges, _) = arm_configuration(
                &vec![pneu.p_joint; geom.hinge_limits.len()],
                &loads,
                geom,
                &cfg.arm.coefficients,
            )
            .unwrap_or_else(|_| (vec![0.0; geom.hinge_limits.len()], vec![]));
            trace.push(TraceRow {
                t: tn,
                phase: mission.phase.to_string(),
                r: body.r.into(),
                euler: body.euler.into(),
                thrusts: thrusts.into(),
                p_joint: pneu.p_joint,
                p_bottom: pneu.p_bottom,
                sv1: pneu.sv1,
                sv2: pneu.sv2,
                pump_pwm: pneu.pump_pwm,
                mode: mode.to_string(),
                hinges,
            });
        }
    }
    summary.finish(&mission, &pneu, &body);
    ScenarioRun {
        trace,
        summary,
        error: None,
    }
}

fn check_command(phase: Phase, source: CommandSource, sv1: bool, sv2: bool, summary: &mut Summary, t: f64) {
    let ok = match (schedule_row(phase), source) {
        (Some(row), CommandSource::Table(i)) => row == i && SCHEDULE[i].sv1() == sv1 && SCHEDULE[i].sv2() == sv2,
        (None, CommandSource::Idle) => phase == Phase::Search,
        (None, CommandSource::ReachFallback) => matches!(phase, Phase::Reach(_)),
        (None, CommandSource::BottomRefill) => matches!(phase, Phase::Perch(_)),
        _ => false,
    };
    if !ok {
        summary.violation(format!("t={t}: command {source:?} does not belong to phase {phase}"));
    }
}

fn check_transition(ev: &MissionEvent, th: &MissionThresholds, summary: &mut Summary) {
    let top = |s: &str| s.split('/').next().unwrap_or(s).to_string();
    let (from, to) = (top(&ev.from), top(&ev.to));
    let order = ["Search", "Approach", "Reach", "Perch", "Deperch"];
    let i = order.iter().position(|p| *p == from).unwrap_or(0);
    let j = order.iter().position(|p| *p == to).unwrap_or(0);
    if i != j && j != (i + 1) % order.len() {
        summary.violation(format!("t={}: illegal transition {} -> {}", ev.t, ev.from, ev.to));
    }
    let held = match (ev.from.as_str(), ev.to.as_str()) {
        (_, "Perch/Inflate") if from == "Reach" => ev.p_joint >= th.p_joint_rigidity,
        ("Perch/Inflate", "Perch/Hold") => ev.p_joint >= th.p_joint_max,
        ("Reach/Pressurize", "Reach/Transfer") => ev.p_bottom >= th.p_bottom_reach,
        ("Deperch", "Search") => ev.p_joint <= th.p_joint_released,
        (_, "Deperch") => ev.p_joint >= th.p_joint_refill,
        _ => true,
    };
    if !held {
        summary.violation(format!(
            "t={}: {} -> {} fired with a failed pressure predicate",
            ev.t, ev.from, ev.to
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scenario_gives_empty_trace() {
        let run = run_scenario(&RobotConfig::default(), &Scenario::empty("empty"), None);
        assert!(run.error.is_none());
        assert!(run.trace.is_empty());
        assert!(run.invariants_held());
    }

    #[test]
    fn observation_interpolates_and_flags() {
        let sc = Scenario::from_json(
            r#"{"name": "s", "duration": 1, "human": [
                {"t": 1, "d": 3.0}, {"t": 3, "d": 1.0, "arm_presented": true},
                {"t": 4, "d": null}, {"t": 5, "d": 2.0, "outlier": true}], "takeoff_at": 4.5}"#,
        )
        .unwrap();
        assert_eq!(sc.observe(0.5).reading, None);
        assert_eq!(sc.observe(2.0).reading, Some(DistanceReading::Valid(2.0)));
        assert!(sc.observe(3.5).arm_presented);
        assert_eq!(sc.observe(4.2).reading, Some(DistanceReading::Dropout));
        let o = sc.observe(5.0);
        assert_eq!(o.reading, Some(DistanceReading::Outlier(2.0)));
        assert!(o.takeoff_request && !sc.observe(4.4).takeoff_request);
    }

    #[test]
    fn rejects_bad_scenarios() {
        for (text, field) in [
            (r#"{"name": "s", "duration": -1}"#, "scenario.duration"),
            (r#"{"name": "s", "duration": 1, "dt": 0.5}"#, "scenario.dt"),
            (
                r#"{"name": "s", "duration": 1, "human": [{"t": 2, "d": 1}, {"t": 1, "d": 1}]}"#,
                "scenario.human[1].t",
            ),
            (
                r#"{"name": "s", "duration": 1, "rotor_tilt": {"rotor": 7, "angle": 0.1}}"#,
                "scenario.rotor_tilt.rotor",
            ),
        ] {
            match Scenario::from_json(text) {
                Err(ConfigError::Invalid { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(
            Scenario::from_json(r#"{"name": "s", "duration": 1, "bogus": 1}"#),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn short_hover_is_quiet() {
        let sc = Scenario::from_json(r#"{"name": "hover", "duration": 0.5, "trace_every": 100}"#).unwrap();
        let run = run_scenario(&RobotConfig::default(), &sc, None);
        assert!(run.invariants_held(), "{:?}", run.summary.invariant_violations);
        assert_eq!(run.trace.len(), 5);
        let last = run.trace.last().unwrap();
        assert!((last.r[2] - 1.0).abs() < 1e-3);
        assert_eq!(last.phase, "Search");
    }

    fn event(from: &str, to: &str, pj: f64) -> MissionEvent {
        MissionEvent {
            t: 1.0,
            from: from.into(),
            to: to.into(),
            p_joint: pj,
            p_bottom: 20.0,
            reason: "test",
        }
    }

    #[test]
    fn checkers_flag_bad_transitions() {
        let th = MissionThresholds::default();
        let mut s = Summary::new("x", 1.0, 1e-3);
        check_transition(&event("Approach", "Reach/Pressurize", 0.0), &th, &mut s);
        check_transition(&event("Reach/Fallback", "Perch/Inflate", 19.5), &th, &mut s);
        assert!(s.invariant_violations.is_empty());
        check_transition(&event("Approach", "Perch/Inflate", 30.0), &th, &mut s);
        assert_eq!(s.invariant_violations.len(), 1);
        check_transition(&event("Reach/Transfer", "Perch/Inflate", 12.0), &th, &mut s);
        check_transition(&event("Deperch", "Search", 8.0), &th, &mut s);
        assert_eq!(s.invariant_violations.len(), 3);
    }

    #[test]
    fn checkers_flag_foreign_commands() {
        let mut s = Summary::new("x", 1.0, 1e-3);
        let hold = Phase::Perch(PerchStep::Hold);
        check_command(hold, CommandSource::Table(4), false, false, &mut s, 0.0);
        assert!(s.invariant_violations.is_empty());
        check_command(hold, CommandSource::Table(3), false, false, &mut s, 0.0);
        check_command(hold, CommandSource::Table(4), true, false, &mut s, 0.0);
        check_command(Phase::Approach, CommandSource::BottomRefill, true, false, &mut s, 0.0);
        assert_eq!(s.invariant_violations.len(), 3);
    }
}
