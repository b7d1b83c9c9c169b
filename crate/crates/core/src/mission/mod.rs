//! Perching mission: phase machine, scripted scenarios and their traces.

mod fsm;
mod scenario;
mod trace;

pub use fsm::*;
pub use scenario::{
    run_scenario, HumanSample, InitialConditions, LeakWindow, RotorTilt, Scenario, ScenarioRun, SimError,
};
pub use trace::{
    flight_csv, pressure_csv, trace_csv, FinalState, Milestone, PhaseSpan, Summary, TraceRow, RECOVERY_BAND,
};
