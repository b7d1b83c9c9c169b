//! Trace rows, run summary and their CSV / JSON renderings.

use serde::Serialize;

use super::fsm::{MissionEvent, MissionState, Phase};
use crate::flight::RigidBodyState;
use crate::format::g6;
use crate::pneumatics::PneumaticState;

/// Attitude band used for the recovery time, rad.
pub const RECOVERY_BAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub phase: String,
    pub r: [f64; 3],
    pub euler: [f64; 3],
    pub thrusts: [f64; 4],
    pub p_joint: f64,
    pub p_bottom: f64,
    pub sv1: bool,
    pub sv2: bool,
    pub pump_pwm: f64,
    pub mode: String,
    /// Hinge angles of one arm, rad.
    pub hinges: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSpan {
    pub t_start: f64,
    pub phase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Milestone {
    pub label: String,
    pub t: f64,
    pub p_joint: f64,
    pub p_bottom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalState {
    pub phase: String,
    pub t: f64,
    pub p_joint: f64,
    pub p_bottom: f64,
    pub position: [f64; 3],
    pub euler: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub duration: f64,
    pub dt: f64,
    pub steps: usize,
    pub timeline: Vec<PhaseSpan>,
    pub transitions: Vec<MissionEvent>,
    /// Joint pressure at propeller stop, at the end of inflation, at the
    /// start of deperching and at release.
    pub milestones: Vec<Milestone>,
    /// Joint pressure on entering Reach, at propeller stop and when the
    /// perch is fully inflated, kPa.
    pub perch_joint_sequence: Vec<f64>,
    /// Largest roll/pitch tracking error while the propellers run, rad.
    pub max_attitude_error: f64,
    /// Time after which roll and pitch stay inside the recovery band.
    pub attitude_recovery_time: Option<f64>,
    /// Pump duty plus valve on-time accumulated in the hold sub-phase.
    pub hold_energy: f64,
    pub hold_time: f64,
    pub max_perch_joint: Option<f64>,
    /// [min, max] bottom pressure while deperching.
    pub deperch_bottom_range: Option<[f64; 2]>,
    pub pneumatic_clamps: usize,
    pub near_hover_violations: usize,
    pub invariant_violations: Vec<String>,
    pub final_state: Option<FinalState>,
    /// Module failure that cut the run short.
    pub error: Option<String>,
    #[serde(skip)]
    last_excursion: Option<f64>,
    #[serde(skip)]
    flew: bool,
}

impl Summary {
    pub fn new(scenario: &str, duration: f64, dt: f64) -> Self {
        Self {
            scenario: scenario.into(),
            duration,
            dt,
            steps: 0,
            timeline: Vec::new(),
            transitions: Vec::new(),
            milestones: Vec::new(),
            perch_joint_sequence: Vec::new(),
            max_attitude_error: 0.0,
            attitude_recovery_time: None,
            hold_energy: 0.0,
            hold_time: 0.0,
            max_perch_joint: None,
            deperch_bottom_range: None,
            pneumatic_clamps: 0,
            near_hover_violations: 0,
            invariant_violations: Vec::new(),
            final_state: None,
            error: None,
            last_excursion: None,
            flew: false,
        }
    }

    pub(crate) fn enter_phase(&mut self, t: f64, phase: Phase) {
        self.timeline.push(PhaseSpan {
            t_start: t,
            phase: phase.name().into(),
        });
    }

    pub(crate) fn violation(&mut self, msg: String) {
        self.invariant_violations.push(msg);
    }

    pub(crate) fn track_recovery(&mut self, t: f64, body: &RigidBodyState, propellers: bool) {
        if !propellers {
            return;
        }
        self.flew = true;
        if body.euler.x.abs() >= RECOVERY_BAND || body.euler.y.abs() >= RECOVERY_BAND {
            self.last_excursion = Some(t);
        }
    }

    pub(crate) fn track_phase_pressures(&mut self, phase: Phase, p: &PneumaticState) {
        match phase {
            Phase::Perch(_) => {
                self.max_perch_joint = Some(self.max_perch_joint.map_or(p.p_joint, |m| m.max(p.p_joint)));
            }
            Phase::Deperch => {
                let r = self.deperch_bottom_range.get_or_insert([p.p_bottom, p.p_bottom]);
                r[0] = r[0].min(p.p_bottom);
                r[1] = r[1].max(p.p_bottom);
            }
            _ => {}
        }
    }

    pub(crate) fn finish(&mut self, m: &MissionState, p: &PneumaticState, body: &RigidBodyState) {
        if self.flew {
            self.attitude_recovery_time = Some(self.last_excursion.unwrap_or(0.0));
        }
        for ev in &self.transitions {
            let first_perch = self.perch_joint_sequence.len() < 3;
            match (ev.from.as_str(), ev.to.as_str()) {
                ("Approach", _) if self.perch_joint_sequence.is_empty() => self.perch_joint_sequence.push(ev.p_joint),
                (f, "Perch/Inflate") if f.starts_with("Reach") && first_perch => {
                    self.perch_joint_sequence.push(ev.p_joint)
                }
                ("Perch/Inflate", "Perch/Hold") if first_perch => self.perch_joint_sequence.push(ev.p_joint),
                _ => {}
            }
            let label = match (ev.from.as_str(), ev.to.as_str()) {
                (f, "Perch/Inflate") if f.starts_with("Reach") => "propeller stop",
                ("Perch/Inflate", "Perch/Hold") => "perch inflated",
                (_, "Deperch") => "deperch start",
                ("Deperch", "Search") => "released",
                _ => continue,
            };
            self.milestones.push(Milestone {
                label: label.into(),
                t: ev.t,
                p_joint: ev.p_joint,
                p_bottom: ev.p_bottom,
            });
        }
        self.final_state = Some(FinalState {
            phase: m.phase.to_string(),
            t: m.t,
            p_joint: p.p_joint,
            p_bottom: p.p_bottom,
            position: body.r.into(),
            euler: body.euler.into(),
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn pressure_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("t_s,p_joint_kpa,p_bottom_kpa,sv1,sv2,pump_pwm,mode\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            g6(r.t),
            g6(r.p_joint),
            g6(r.p_bottom),
            bit(r.sv1),
            bit(r.sv2),
            g6(r.pump_pwm),
            r.mode
        ));
    }
    out
}

pub fn flight_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("t_s,x,y,z,phi,theta,psi,l1,l2,l3,l4\n");
    for r in rows {
        let cols: Vec<String> = [r.t]
            .iter()
            .chain(&r.r)
            .chain(&r.euler)
            .chain(&r.thrusts)
            .map(|v| g6(*v))
            .collect();
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Everything in one table, hinge angles last.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let n_hinge = rows.first().map_or(0, |r| r.hinges.len());
    let mut out = String::from("t_s,phase,x,y,z,phi,theta,psi,l1,l2,l3,l4,p_joint_kpa,p_bottom_kpa,sv1,sv2,pump_pwm");
    for i in 1..=n_hinge {
        out.push_str(&format!(",hinge{i}"));
    }
    out.push('\n');
    for r in rows {
        let mut cols = vec![g6(r.t), r.phase.clone()];
        cols.extend(r.r.iter().chain(&r.euler).chain(&r.thrusts).map(|v| g6(*v)));
        cols.extend([
            g6(r.p_joint),
            g6(r.p_bottom),
            bit(r.sv1).into(),
            bit(r.sv2).into(),
            g6(r.pump_pwm),
        ]);
        cols.extend(r.hinges.iter().map(|v| g6(*v)));
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}
