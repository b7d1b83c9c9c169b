//! Robot configuration file (JSON). Every section falls back to the
//! prototype values when omitted.

use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::arm::{ArmGeometry, MassBudget, TorqueCoefficients};
use crate::flight::{x_layout, ControllerGains, RotorConfig};
use crate::mission::{ApproachGains, MissionThresholds};
use crate::pneumatics::{AirbagSpec, FlowParams, P_ATM};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(section: &str, msg: impl ToString) -> ConfigError {
    let msg = msg.to_string();
    // Sub-validators report "field: message".
    match msg.split_once(": ") {
        Some((field, rest)) if !field.contains(' ') => ConfigError::Invalid {
            field: format!("{section}.{field}"),
            message: rest.to_string(),
        },
        _ => ConfigError::Invalid {
            field: section.to_string(),
            message: msg,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PneumaticsConfig {
    pub joint: AirbagSpec,
    pub bottom: AirbagSpec,
    #[serde(default = "default_p_atm")]
    pub p_atm: f64,
    #[serde(default)]
    pub flow: FlowParams,
}

fn default_p_atm() -> f64 {
    P_ATM
}

impl Default for PneumaticsConfig {
    fn default() -> Self {
        Self {
            joint: AirbagSpec::prototype_joint(),
            bottom: AirbagSpec::prototype_bottom(),
            p_atm: P_ATM,
            flow: FlowParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ArmConfig {
    pub geometry: ArmGeometry,
    pub coefficients: TorqueCoefficients,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlightConfig {
    /// Principal moments of inertia, kg·m².
    pub inertia_diag: [f64; 3],
    pub rotors: Vec<RotorConfig>,
    pub gains: ControllerGains,
    /// Per-rotor thrust ceiling, N.
    pub thrust_max: f64,
    /// Per-rotor thrust floor while flying, N. Defaults to the arm
    /// rigidity bound.
    pub thrust_floor: Option<f64>,
    /// Integration step, s.
    pub dt: f64,
}

impl Default for FlightConfig {
    fn default() -> Self {
        let i = crate::flight::BodyParams::box_inertia(MassBudget::default().total(), 0.35, 0.35, 0.25);
        Self {
            inertia_diag: [i[(0, 0)], i[(1, 1)], i[(2, 2)]],
            rotors: x_layout(0.09, 0.016),
            gains: ControllerGains::default(),
            thrust_max: 7.0,
            thrust_floor: None,
            dt: 1e-3,
        }
    }
}

impl FlightConfig {
    pub fn inertia(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.inertia_diag.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MissionConfig {
    pub thresholds: MissionThresholds,
    pub approach: ApproachGains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RobotConfig {
    pub pneumatics: PneumaticsConfig,
    pub arm: ArmConfig,
    pub mass: MassBudget,
    pub flight: FlightConfig,
    pub mission: MissionConfig,
}

pub fn validate_dt(dt: f64) -> Result<(), ConfigError> {
    if dt > 0.0 && dt <= 0.01 {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            field: "dt".into(),
            message: format!("{dt} not in (0, 0.01]"),
        })
    }
}

impl RobotConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Per-rotor thrust floor in flight.
    pub fn thrust_floor(&self) -> f64 {
        self.flight.thrust_floor.unwrap_or_else(|| self.mass.rigidity_thrust())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.pneumatics;
        p.joint
            .validate()
            .map_err(|e| invalid("pneumatics.joint", strip_spec(&e.to_string())))?;
        if p.joint.segment_short_sides != [p.joint.short_side] {
            return Err(invalid(
                "pneumatics.joint",
                "segment_short_sides: must equal [short_side] for a joint bag",
            ));
        }
        p.bottom
            .validate()
            .map_err(|e| invalid("pneumatics.bottom", strip_spec(&e.to_string())))?;
        if !(p.p_atm > 0.0) {
            return Err(invalid("pneumatics", "p_atm: must be > 0"));
        }
        p.flow
            .validate()
            .map_err(|e| invalid("pneumatics.flow", strip_flow(&e.to_string())))?;

        self.arm
            .geometry
            .validate()
            .map_err(|e| invalid("arm.geometry", strip_arm(&e.to_string())))?;
        self.arm
            .coefficients
            .validate()
            .map_err(|e| invalid("arm.coefficients", strip_arm(&e.to_string())))?;
        self.mass
            .validate()
            .map_err(|e| invalid("mass", strip_arm(&e.to_string())))?;

        let f = &self.flight;
        if let Some(i) = f.inertia_diag.iter().position(|v| !(*v > 0.0)) {
            return Err(invalid("flight", format!("inertia_diag[{i}]: must be > 0")));
        }
        if f.rotors.len() != 4 {
            return Err(invalid(
                "flight",
                format!("rotors: expected 4 entries, got {}", f.rotors.len()),
            ));
        }
        for (i, r) in f.rotors.iter().enumerate() {
            let n = nalgebra::Vector3::from(r.direction).norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(invalid(
                    "flight",
                    format!("rotors[{i}].direction: must be a non-zero vector"),
                ));
            }
        }
        f.gains.validate().map_err(|e| invalid("flight.gains", e))?;
        if !(f.thrust_max > 0.0) {
            return Err(invalid("flight", "thrust_max: must be > 0"));
        }
        let floor = self.thrust_floor();
        if !(floor >= 0.0 && floor < f.thrust_max) {
            return Err(invalid("flight", "thrust_floor: need 0 <= thrust_floor < thrust_max"));
        }
        if 4.0 * f.thrust_max < self.mass.total() * self.mass.g {
            return Err(invalid("flight", "thrust_max: four rotors cannot lift the robot"));
        }
        validate_dt(f.dt).map_err(|_| invalid("flight", format!("dt: {} not in (0, 0.01]", f.dt)))?;

        self.mission
            .thresholds
            .validate(p.joint.p_max, p.bottom.p_max)
            .map_err(|e| invalid("mission.thresholds", e))?;
        let a = &self.mission.approach;
        for (name, v) in [
            ("kp", a.kp),
            ("kd", a.kd),
            ("max_speed", a.max_speed),
            ("outlier_jump", a.outlier_jump),
            ("pwm_kp", a.pwm_kp),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid("mission.approach", format!("{name}: must be >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&a.pwm_min) {
            return Err(invalid("mission.approach", "pwm_min: must be in [0, 1]"));
        }
        Ok(())
    }
}

fn strip_spec(s: &str) -> String {
    s.trim_start_matches("invalid airbag spec: ").to_string()
}

fn strip_flow(s: &str) -> String {
    s.trim_start_matches("invalid flow parameters: ").to_string()
}

fn strip_arm(s: &str) -> String {
    s.trim_start_matches("invalid arm parameters: ").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RobotConfig::default();
        c.validate().unwrap();
        let back = RobotConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn field_precise_messages() {
        let mut c = RobotConfig::default();
        c.pneumatics.bottom.p_max = -1.0;
        let e = c.validate().unwrap_err().to_string();
        assert!(e.starts_with("pneumatics.bottom.p_max:"), "{e}");

        let mut c = RobotConfig::default();
        c.pneumatics.flow.exhaust_conductance = 0.0;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .starts_with("pneumatics.flow.exhaust_conductance:"));

        let mut c = RobotConfig::default();
        c.mission.thresholds.p_joint_max = 90.0;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .starts_with("mission.thresholds.p_joint_max:"));

        let mut c = RobotConfig::default();
        c.flight.dt = 0.05;
        assert!(c.validate().unwrap_err().to_string().starts_with("flight.dt:"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let e = RobotConfig::from_json(r#"{"pneumatics": {"joint": {}, "bottom": {}, "pmax": 3}}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Parse(_)));
        let e = RobotConfig::from_json(r#"{"masses": {}}"#).unwrap_err();
        assert!(e.to_string().contains("masses"), "{e}");
    }

    #[test]
    fn empty_object_is_prototype() {
        assert_eq!(RobotConfig::from_json("{}").unwrap(), RobotConfig::default());
    }
}
