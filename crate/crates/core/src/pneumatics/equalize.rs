//! Pre-charge / equalization relation between the bottom reservoir and the
//! joint circuit.
//!
//! Before the transfer valve opens the joints sit at 0 kPa gauge and the
//! bottom bags at `p0`; afterwards both settle at a common `p1`. With
//! `S_j = n_j·x_j²·y_j`, `S_b = n_b·Σ_k x_b,k²·y_b` and
//! `V_res = n_j·V_j,res + n_b·V_b,res` the relation is
//!
//! ```text
//! (p1 + p_atm)(S_j F_j(p1) + S_b F_b(p1)) = (p0 + p_atm) S_b F_b(p0) + (p0 − p1) V_res
//! ```
//!
//! It is cubic in `p0` and solved in closed form; for `p1` it is solved by a
//! bracketed search on `[0, p0]`.

use super::airbag::{shape_factor_unchecked, AirbagSpec};
use super::PneumaticError;
use crate::roots::{bracketed_root, real_cubic_roots};

const FORWARD_TOL: f64 = 1e-12;

fn residual_volume(joint: &AirbagSpec, bottom: &AirbagSpec) -> f64 {
    joint.count as f64 * joint.v_res + bottom.count as f64 * bottom.v_res
}

fn joint_swept(joint: &AirbagSpec, p: f64) -> f64 {
    joint.count as f64 * joint.chamber_sum() * shape_factor_unchecked(p, joint.p_max)
}

fn bottom_swept(bottom: &AirbagSpec, p: f64) -> f64 {
    bottom.count as f64 * bottom.chamber_sum() * shape_factor_unchecked(p, bottom.p_max)
}

/// Residual of the equalization relation, `lhs(p1) − rhs(p0, p1)`.
pub fn equalization_residual(p0: f64, p1: f64, p_atm: f64, joint: &AirbagSpec, bottom: &AirbagSpec) -> f64 {
    let lhs = (p1 + p_atm) * (joint_swept(joint, p1) + bottom_swept(bottom, p1));
    let rhs = (p0 + p_atm) * bottom_swept(bottom, p0) + (p0 - p1) * residual_volume(joint, bottom);
    lhs - rhs
}

/// Common pressure reached after a bottom reservoir at `p0` vents into an
/// empty joint circuit.
pub fn equalized_pressure_forward(
    p0: f64,
    p_atm: f64,
    joint: &AirbagSpec,
    bottom: &AirbagSpec,
) -> Result<f64, PneumaticError> {
    bottom.check_pressure(p0)?;
    if p0 == 0.0 {
        return Ok(0.0);
    }
    // p1 never exceeds p0; the joint bags must also accept it.
    let hi = p0.min(joint.p_max);
    bracketed_root(
        |p1| equalization_residual(p0, p1, p_atm, joint, bottom),
        0.0,
        hi,
        FORWARD_TOL,
    )
    .map_err(|e| PneumaticError::NoBracket {
        lo: e.lo,
        hi: e.hi,
        f_lo: e.f_lo,
        f_hi: e.f_hi,
    })
}

/// Coefficients `[c3, c2, c1, c0]` of the equalization relation as a cubic
/// in `p0` for a fixed target `p1`.
pub fn initial_pressure_cubic(p1: f64, p_atm: f64, joint: &AirbagSpec, bottom: &AirbagSpec) -> [f64; 4] {
    let poly = bottom.volume_polynomial();
    let nb = bottom.count as f64;
    let q = nb * poly.quadratic;
    let l = nb * poly.linear;
    let v_res = residual_volume(joint, bottom);
    let lhs = (p1 + p_atm) * (joint_swept(joint, p1) + bottom_swept(bottom, p1));
    // (p0 + p_atm)(q p0² + l p0) + v_res (p0 − p1) − lhs
    [q, l + p_atm * q, p_atm * l + v_res, -(v_res * p1 + lhs)]
}

/// Outcome of the inverse design problem.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPressure {
    /// The unique real root inside `[0, bottom.p_max]`.
    pub valid_root: f64,
    /// Every real root of the cubic, ascending.
    pub all_roots: Vec<f64>,
}

/// Bottom pre-charge `p0` needed to reach the equalized target `p1`.
pub fn initial_pressure_for_target(
    p1: f64,
    p_atm: f64,
    joint: &AirbagSpec,
    bottom: &AirbagSpec,
) -> Result<InitialPressure, PneumaticError> {
    if !(p1 > 0.0 && p1 < bottom.p_max && p1 <= joint.p_max) {
        return Err(PneumaticError::Domain {
            value: p1,
            lo: 0.0,
            hi: bottom.p_max.min(joint.p_max),
        });
    }
    let all_roots = real_cubic_roots(initial_pressure_cubic(p1, p_atm, joint, bottom));
    let slack = 1e-9 * bottom.p_max;
    let in_range: Vec<f64> = all_roots
        .iter()
        .copied()
        .filter(|r| *r >= -slack && *r <= bottom.p_max + slack)
        .collect();
    match in_range.as_slice() {
        [] => Err(PneumaticError::Infeasible {
            target: p1,
            roots: all_roots,
        }),
        [only] => Ok(InitialPressure {
            valid_root: only.clamp(0.0, bottom.p_max),
            all_roots,
        }),
        _ => Err(PneumaticError::Ambiguous { candidates: in_range }),
    }
}
