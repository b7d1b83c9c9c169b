//! Hinge torque of a pressurized joint airbag, torque-coefficient fitting,
//! static hinge-chain configuration and the thrust bound that keeps the
//! unilateral arm straight.
//!
//! Torque-model units: lengths in m, angles in rad, `p0` in kPa (converted
//! to Pa internally), torque in N·m.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const PA_PER_KPA: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmGeometry {
    pub l_link: f64,
    pub y0: f64,
    pub y1: f64,
    /// Hinge axis to segment centre; used to turn measured forces into
    /// torques.
    pub lever_r: f64,
    /// Root to rotor mount.
    pub arm_length: f64,
    pub hinge_limits: Vec<f64>,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        Self {
            l_link: 0.027,
            y0: 0.006,
            y1: 0.018,
            lever_r: 0.0115,
            arm_length: 0.127,
            hinge_limits: vec![5.0 * PI / 18.0, PI / 3.0, PI / 3.0],
        }
    }
}

impl ArmGeometry {
    pub fn validate(&self) -> Result<(), ArmError> {
        let bad = |m: &str| Err(ArmError::InvalidGeometry(m.to_string()));
        if !(self.y0 >= 0.0 && self.y1 > self.y0) {
            return bad("y0, y1: need 0 <= y0 < y1");
        }
        if !(self.l_link > 0.0) {
            return bad("l_link: must be > 0");
        }
        if !(self.lever_r > 0.0) {
            return bad("lever_r: must be > 0");
        }
        if !(self.arm_length > 0.0) {
            return bad("arm_length: must be > 0");
        }
        if self.hinge_limits.is_empty() || self.hinge_limits.iter().any(|t| !(*t > 0.0)) {
            return bad("hinge_limits: need at least one positive limit");
        }
        if self.hinge_limits.iter().sum::<f64>() > PI + 1e-12 {
            return bad("hinge_limits: sum must not exceed pi");
        }
        Ok(())
    }

    /// `½·l_link·(y1² − y0²)`, m³.
    pub fn pressure_prefactor(&self) -> f64 {
        0.5 * self.l_link * (self.y1 * self.y1 - self.y0 * self.y0)
    }

    /// `⅓·l_link·(y1³ − y0³)`, m⁴.
    pub fn gradient_prefactor(&self) -> f64 {
        self.l_link * (self.y1.powi(3) - self.y0.powi(3)) / 3.0
    }

    pub fn max_hinge_limit(&self) -> f64 {
        self.hinge_limits.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorqueCoefficients {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for TorqueCoefficients {
    fn default() -> Self {
        Self {
            k0: 0.2206,
            k1: 0.1745,
            k2: -1.457,
        }
    }
}

impl TorqueCoefficients {
    pub fn validate(&self) -> Result<(), ArmError> {
        if !(self.k0 > 0.0) {
            return Err(ArmError::InvalidGeometry("k0: must be > 0".into()));
        }
        if !(self.k1.is_finite() && self.k2.is_finite()) {
            return Err(ArmError::InvalidGeometry("k1, k2: must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArmError {
    #[error("invalid arm parameters: {0}")]
    InvalidGeometry(String),
    #[error("torque fit: {0}")]
    Fit(String),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
}

/// Internal airbag pressure at distance `y` from the hinge, kPa-based.
pub fn pressure_distribution(y: f64, theta: f64, p0: f64, c: &TorqueCoefficients) -> f64 {
    c.k0 * p0 - c.k1 * p0 * theta - c.k2 * y * theta
}

/// Hinge torque in N·m at opening angle `theta` and airbag pressure `p0`
/// (kPa).
pub fn hinge_torque(theta: f64, p0: f64, geom: &ArmGeometry, c: &TorqueCoefficients) -> f64 {
    let p = p0 * PA_PER_KPA;
    (c.k0 - c.k1 * theta) * p * geom.pressure_prefactor() - c.k2 * theta * geom.gradient_prefactor()
}

/// One measured point for coefficient fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueSample {
    pub theta: f64,
    pub p0: f64,
    pub torque: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorqueFit {
    pub coeffs: TorqueCoefficients,
    /// `model − measured` per sample.
    pub residuals: Vec<f64>,
    /// Standard errors of (k0, k1, k2); `None` without spare degrees of
    /// freedom.
    pub std_errors: Option<[f64; 3]>,
}

impl TorqueFit {
    pub fn residual_norm(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}

/// Least-squares fit of (k0, k1, k2) to measured hinge torques.
///
/// The torque model is linear in the coefficients; columns are scaled to
/// unit norm before an SVD solve so the tiny `k2` column is not lost to
/// rounding.
pub fn fit_torque_coefficients(samples: &[TorqueSample], geom: &ArmGeometry) -> Result<TorqueFit, ArmError> {
    if samples.len() < 3 {
        return Err(ArmError::Fit(format!("need at least 3 samples, got {}", samples.len())));
    }
    let first = samples[0].theta;
    if samples.iter().all(|s| (s.theta - first).abs() < 1e-12) {
        return Err(ArmError::Fit("samples must span at least two hinge angles".into()));
    }
    let a = geom.pressure_prefactor();
    let b = geom.gradient_prefactor();
    let n = samples.len();
    let mut x = DMatrix::<f64>::zeros(n, 3);
    let mut rhs = DVector::<f64>::zeros(n);
    for (i, s) in samples.iter().enumerate() {
        let p = s.p0 * PA_PER_KPA;
        x[(i, 0)] = a * p;
        x[(i, 1)] = -a * p * s.theta;
        x[(i, 2)] = -b * s.theta;
        rhs[i] = s.torque;
    }
    let mut scale = [0.0; 3];
    for (j, sc) in scale.iter_mut().enumerate() {
        *sc = x.column(j).norm();
        if *sc == 0.0 {
            return Err(ArmError::Fit(format!("column {j} of the design matrix is zero")));
        }
    }
    let mut xs = x.clone();
    for (j, sc) in scale.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*sc);
    }
    let svd = xs.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if s_min <= 1e-10 * s_max {
        return Err(ArmError::Fit(format!(
            "design matrix is rank deficient (singular values {s_max:.3e} .. {s_min:.3e})"
        )));
    }
    let z = svd
        .solve(&rhs, 1e-12 * s_max)
        .map_err(|e| ArmError::Fit(e.to_string()))?;
    let k = [z[0] / scale[0], z[1] / scale[1], z[2] / scale[2]];
    let coeffs = TorqueCoefficients {
        k0: k[0],
        k1: k[1],
        k2: k[2],
    };
    let fitted = &x * DVector::from_row_slice(&k);
    let residuals: Vec<f64> = (0..n).map(|i| fitted[i] - rhs[i]).collect();

    let std_errors = if n > 3 {
        let sigma2 = residuals.iter().map(|r| r * r).sum::<f64>() / (n - 3) as f64;
        (xs.transpose() * &xs).try_inverse().map(|cov| {
            let mut se = [0.0; 3];
            for j in 0..3 {
                se[j] = (sigma2 * cov[(j, j)]).sqrt() / scale[j];
            }
            se
        })
    } else {
        None
    };
    Ok(TorqueFit {
        coeffs,
        residuals,
        std_errors,
    })
}

/// Static opening angle of each hinge under its joint pressure and resisting
/// load torque. Returns the angles and whether each one hit its limit.
pub fn arm_configuration(
    joint_pressures: &[f64],
    load_torques: &[f64],
    geom: &ArmGeometry,
    c: &TorqueCoefficients,
) -> Result<(Vec<f64>, Vec<bool>), ArmError> {
    let n = geom.hinge_limits.len();
    for len in [joint_pressures.len(), load_torques.len()] {
        if len != n {
            return Err(ArmError::Length { expected: n, got: len });
        }
    }
    let mut angles = Vec::with_capacity(n);
    let mut clamped = Vec::with_capacity(n);
    for ((&p, &load), &limit) in joint_pressures.iter().zip(load_torques).zip(&geom.hinge_limits) {
        let f = |t: f64| hinge_torque(t, p, geom, c) - load;
        if f(0.0) <= 0.0 {
            angles.push(0.0);
            clamped.push(false);
        } else if f(limit) >= 0.0 {
            angles.push(limit);
            clamped.push(true);
        } else {
            let (mut lo, mut hi) = (0.0, limit);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 {
                    break;
                }
            }
            angles.push(0.5 * (lo + hi));
            clamped.push(false);
        }
    }
    Ok((angles, clamped))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassBudget {
    pub m_body: f64,
    pub m_arm: f64,
    pub m_rotor: f64,
    #[serde(default = "MassBudget::default_g")]
    pub g: f64,
}

impl Default for MassBudget {
    fn default() -> Self {
        Self {
            m_body: 0.804,
            m_arm: 0.124,
            m_rotor: 0.036,
            g: Self::default_g(),
        }
    }
}

impl MassBudget {
    fn default_g() -> f64 {
        9.81
    }

    pub fn total(&self) -> f64 {
        self.m_body + 4.0 * self.m_arm + 4.0 * self.m_rotor
    }

    /// Smallest per-rotor thrust that keeps the arm-base moment non-negative.
    pub fn rigidity_thrust(&self) -> f64 {
        0.5 * self.m_arm * self.g + self.m_rotor * self.g
    }

    /// Bending moment at the arm root for rotor thrust `lambda`, with the
    /// arm mass spread evenly over `l`.
    pub fn arm_base_moment(&self, lambda: f64, l: f64) -> f64 {
        (lambda - self.m_rotor * self.g) * l - 0.5 * self.m_arm * self.g * l
    }

    pub fn validate(&self) -> Result<(), ArmError> {
        for (name, v) in [
            ("m_body", self.m_body),
            ("m_arm", self.m_arm),
            ("m_rotor", self.m_rotor),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ArmError::InvalidGeometry(format!("{name}: must be >= 0")));
            }
        }
        if !(self.g > 0.0) {
            return Err(ArmError::InvalidGeometry("g: must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoverCheck {
    pub lambda_hover: f64,
    pub rigidity_thrust: f64,
    pub rigid: bool,
    /// `m_body + 2·m_arm ≥ 0`.
    pub mass_relation_holds: bool,
}

pub fn hover_thrust_check(budget: &MassBudget) -> HoverCheck {
    let lambda_hover = budget.total() * budget.g / 4.0;
    HoverCheck {
        lambda_hover,
        rigidity_thrust: budget.rigidity_thrust(),
        rigid: arm_is_rigid(lambda_hover, budget),
        mass_relation_holds: budget.m_body + 2.0 * budget.m_arm >= 0.0,
    }
}

/// Whether rotor thrust `lambda` keeps the arm braced straight. Zero thrust
/// (propellers stopped) never does.
pub fn arm_is_rigid(lambda: f64, budget: &MassBudget) -> bool {
    lambda > 0.0 && lambda >= budget.rigidity_thrust()
}
