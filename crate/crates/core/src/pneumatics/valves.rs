//! Solenoid-valve / pump truth tables.
//!
//! SV1 routes the pump: ON feeds the bottom bags, OFF feeds the joint line.
//! SV2 switches the joint line: ON vents it, OFF connects it to the bottom
//! outlet through the check valve. Cells that branch on pressure compare the
//! joint (J) against the bottom (B).

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JointAction {
    IntakePump,
    IntakePumpBottom,
    Exhaust,
    IntakeExhaust,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HoldKind {
    Plain,
    DifferentPressure,
    SamePressure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BottomAction {
    IntakePump,
    ExhaustJoint,
    Hold(HoldKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowMode {
    pub joint: JointAction,
    pub bottom: BottomAction,
}

impl fmt::Display for JointAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JointAction::IntakePump => "Intake(Pump)",
            JointAction::IntakePumpBottom => "Intake(Pump + Bottom)",
            JointAction::Exhaust => "Exhaust",
            JointAction::IntakeExhaust => "Intake + Exhaust",
            JointAction::Hold => "Hold",
        })
    }
}

impl fmt::Display for BottomAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BottomAction::IntakePump => "Intake(Pump)",
            BottomAction::ExhaustJoint => "Exhaust(Joint)",
            BottomAction::Hold(HoldKind::Plain) => "Hold",
            BottomAction::Hold(HoldKind::DifferentPressure) => "Hold (Different Pressure)",
            BottomAction::Hold(HoldKind::SamePressure) => "Hold (Same Pressure)",
        })
    }
}

impl fmt::Display for FlowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "J: {} / B: {}", self.joint, self.bottom)
    }
}

impl FlowMode {
    const fn new(joint: JointAction, bottom: BottomAction) -> Self {
        Self { joint, bottom }
    }

    /// Whether the pump discharges into the bottom bags.
    pub fn pump_to_bottom(&self) -> bool {
        self.bottom == BottomAction::IntakePump
    }

    /// Whether the pump discharges into the joint line directly.
    pub fn pump_to_joint(&self) -> bool {
        !self.pump_to_bottom()
            && matches!(
                self.joint,
                JointAction::IntakePump | JointAction::IntakePumpBottom | JointAction::IntakeExhaust
            )
    }

    /// Whether the joint line vents to ambient.
    pub fn joint_vents(&self) -> bool {
        matches!(self.joint, JointAction::Exhaust | JointAction::IntakeExhaust)
    }

    /// Whether the bottom outlet is connected to the joint line. Flow still
    /// requires the check valve to open (bottom above joint).
    pub fn transfer_open(&self) -> bool {
        matches!(
            (self.joint, self.bottom),
            (JointAction::IntakePumpBottom, _)
                | (JointAction::IntakePump, BottomAction::IntakePump)
                | (_, BottomAction::Hold(HoldKind::SamePressure))
        )
    }
}

/// Which branch of a pressure-dependent cell applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ordering {
    /// Joint strictly above bottom.
    JointAbove,
    /// Joint at or below bottom.
    JointAtOrBelow,
}

impl Ordering {
    pub fn of(p_joint: f64, p_bottom: f64) -> Self {
        if p_joint > p_bottom {
            Ordering::JointAbove
        } else {
            Ordering::JointAtOrBelow
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Ordering::JointAbove => "J>B",
            Ordering::JointAtOrBelow => "J<=B",
        }
    }
}

/// Actuator behaviour for a valve/pump setting at the given pressures.
pub fn valve_logic(sv1: bool, sv2: bool, pump_on: bool, p_joint: f64, p_bottom: f64) -> FlowMode {
    flow_mode(sv1, sv2, pump_on, Ordering::of(p_joint, p_bottom))
}

/// Table lookup keyed directly on the pressure ordering.
pub fn flow_mode(sv1: bool, sv2: bool, pump_on: bool, ordering: Ordering) -> FlowMode {
    use BottomAction as B;
    use JointAction as J;
    use Ordering::*;

    if pump_on {
        match (sv1, sv2, ordering) {
            (true, true, _) => FlowMode::new(J::Exhaust, B::IntakePump),
            (true, false, JointAbove) => FlowMode::new(J::Hold, B::IntakePump),
            (true, false, JointAtOrBelow) => FlowMode::new(J::IntakePump, B::IntakePump),
            (false, true, _) => FlowMode::new(J::IntakeExhaust, B::Hold(HoldKind::Plain)),
            (false, false, JointAbove) => FlowMode::new(J::IntakePump, B::Hold(HoldKind::Plain)),
            (false, false, JointAtOrBelow) => FlowMode::new(J::IntakePumpBottom, B::ExhaustJoint),
        }
    } else {
        match (sv1, ordering) {
            (true, _) => FlowMode::new(J::Exhaust, B::Hold(HoldKind::Plain)),
            (false, JointAbove) => FlowMode::new(J::Hold, B::Hold(HoldKind::DifferentPressure)),
            (false, JointAtOrBelow) => FlowMode::new(J::Hold, B::Hold(HoldKind::SamePressure)),
        }
    }
}

/// One row of the full truth-table dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruthTableRow {
    pub sv1: bool,
    pub sv2: bool,
    pub pump_on: bool,
    pub ordering: Ordering,
    pub mode: FlowMode,
}

/// All 16 (pump, SV1, SV2, ordering) cells in a fixed order.
pub fn truth_table() -> Vec<TruthTableRow> {
    let mut rows = Vec::with_capacity(16);
    for pump_on in [true, false] {
        for sv1 in [true, false] {
            for sv2 in [true, false] {
                for ordering in [Ordering::JointAbove, Ordering::JointAtOrBelow] {
                    rows.push(TruthTableRow {
                        sv1,
                        sv2,
                        pump_on,
                        ordering,
                        mode: flow_mode(sv1, sv2, pump_on, ordering),
                    });
                }
            }
        }
    }
    rows
}

fn on_off(b: bool) -> &'static str {
    if b {
        "ON"
    } else {
        "OFF"
    }
}

/// Renders the truth table as CSV text (LF line endings).
pub fn render_truth_table() -> String {
    let mut out = String::from("pump,sv1,sv2,ordering,joint,bottom\n");
    for r in truth_table() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            on_off(r.pump_on),
            on_off(r.sv1),
            on_off(r.sv2),
            r.ordering.label(),
            r.mode.joint,
            r.mode.bottom
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pump_on_both_on() {
        for (pj, pb) in [(0.0, 0.0), (50.0, 10.0), (10.0, 50.0)] {
            let m = valve_logic(true, true, true, pj, pb);
            assert_eq!(m.joint, JointAction::Exhaust);
            assert_eq!(m.bottom, BottomAction::IntakePump);
        }
    }

    #[test]
    fn pump_on_all_off_joint_below() {
        let m = valve_logic(false, false, true, 10.0, 30.0);
        assert_eq!(m.joint, JointAction::IntakePumpBottom);
        assert_eq!(m.bottom, BottomAction::ExhaustJoint);
        assert!(m.transfer_open());
    }

    #[test]
    fn pump_off_all_off_joint_above() {
        let m = valve_logic(false, false, false, 50.0, 22.0);
        assert_eq!(m.joint, JointAction::Hold);
        assert_eq!(m.bottom, BottomAction::Hold(HoldKind::DifferentPressure));
        assert_eq!(m.bottom.to_string(), "Hold (Different Pressure)");
    }

    #[test]
    fn pump_off_sv1_on_exhausts_joint() {
        for sv2 in [true, false] {
            let m = valve_logic(true, sv2, false, 30.0, 20.0);
            assert_eq!(m.joint, JointAction::Exhaust);
            assert_eq!(m.bottom, BottomAction::Hold(HoldKind::Plain));
        }
    }

    #[test]
    fn equal_pressures_use_at_or_below_branch() {
        assert_eq!(Ordering::of(20.0, 20.0), Ordering::JointAtOrBelow);
    }

    #[test]
    fn sixteen_distinct_cells() {
        let t = truth_table();
        assert_eq!(t.len(), 16);
        let keys: std::collections::HashSet<_> = t.iter().map(|r| (r.pump_on, r.sv1, r.sv2, r.ordering)).collect();
        assert_eq!(keys.len(), 16);
    }

    #[test]
    fn rendering_is_stable() {
        assert_eq!(render_truth_table(), render_truth_table());
        assert_eq!(render_truth_table().lines().count(), 17);
    }
}
