use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::PneumaticError;

/// Relative slack allowed above `p_max` before a pressure is rejected.
const P_MAX_SLACK: f64 = 1e-9;

/// Geometry and pneumatic limits of one airbag class.
///
/// Lengths are in mm, pressures in kPa gauge, volumes in mm³. A folded bag
/// with a rectangular footprint `short_side × long_side` inflates towards a
/// cylinder of circumference `2·short_side`. Multi-chamber bags list the
/// short side of each chamber in `segment_short_sides`; they share
/// `long_side`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirbagSpec {
    pub short_side: f64,
    pub long_side: f64,
    pub p_max: f64,
    #[serde(default)]
    pub v_res: f64,
    pub count: u32,
    pub segment_short_sides: Vec<f64>,
}

/// `V(p) = quadratic·p² + linear·p + constant` for a single bag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumePolynomial {
    pub quadratic: f64,
    pub linear: f64,
    pub constant: f64,
}

impl VolumePolynomial {
    pub fn eval(&self, p: f64) -> f64 {
        (self.quadratic * p + self.linear) * p + self.constant
    }
}

impl AirbagSpec {
    /// Single-chamber joint airbag.
    pub fn joint(short_side: f64, long_side: f64, p_max: f64, v_res: f64, count: u32) -> Self {
        Self {
            short_side,
            long_side,
            p_max,
            v_res,
            count,
            segment_short_sides: vec![short_side],
        }
    }

    /// Joint airbag used on the prototype: 30 × 20 mm folds, 20 bags.
    pub fn prototype_joint() -> Self {
        Self::joint(30.0, 20.0, 80.0, 1587.0, 20)
    }

    /// Bottom airbag used on the prototype: five chambers, 4 bags.
    pub fn prototype_bottom() -> Self {
        Self {
            short_side: 30.0,
            long_side: 40.0,
            p_max: 80.0,
            v_res: 0.0,
            count: 4,
            segment_short_sides: vec![20.0, 15.0, 10.0, 30.0, 25.0],
        }
    }

    pub fn validate(&self) -> Result<(), PneumaticError> {
        let bad = |field: &str, msg: &str| Err(PneumaticError::InvalidSpec(format!("{field}: {msg}")));
        if !(self.short_side > 0.0) {
            return bad("short_side", "must be > 0");
        }
        if !(self.long_side > 0.0) {
            return bad("long_side", "must be > 0");
        }
        if !(self.p_max > 0.0) {
            return bad("p_max", "must be > 0");
        }
        if !(self.v_res >= 0.0) {
            return bad("v_res", "must be >= 0");
        }
        if self.count < 1 {
            return bad("count", "must be >= 1");
        }
        if self.segment_short_sides.is_empty() {
            return bad("segment_short_sides", "must not be empty");
        }
        if self.segment_short_sides.iter().any(|x| !(*x > 0.0)) {
            return bad("segment_short_sides", "every entry must be > 0");
        }
        Ok(())
    }

    /// Σ_k x_k²·y over the chambers of one bag, in mm³.
    pub fn chamber_sum(&self) -> f64 {
        self.segment_short_sides.iter().map(|x| x * x * self.long_side).sum()
    }

    /// Exact expansion of `chamber_sum·F(p) + v_res` into powers of `p`.
    pub fn volume_polynomial(&self) -> VolumePolynomial {
        let s = self.chamber_sum();
        VolumePolynomial {
            quadratic: -(PI - 2.0) * s / (2.0 * PI * self.p_max * self.p_max),
            linear: s / (2.0 * self.p_max),
            constant: self.v_res,
        }
    }

    pub(crate) fn check_pressure(&self, p: f64) -> Result<(), PneumaticError> {
        check_range(p, self.p_max)
    }
}

fn check_range(p: f64, p_max: f64) -> Result<(), PneumaticError> {
    if p.is_finite() && p >= 0.0 && p <= p_max * (1.0 + P_MAX_SLACK) {
        Ok(())
    } else {
        Err(PneumaticError::Domain {
            value: p,
            lo: 0.0,
            hi: p_max,
        })
    }
}

/// Cross-section factor of a partially inflated bag.
///
/// `F(p) = p/(2π·p_max)·(π − (π−2)·p/p_max)`; the bag volume above its
/// residual is `x²·y·F(p)`. `F(0) = 0` (flat) and `F(p_max) = 1/π` (circular
/// cylinder).
pub fn shape_factor(p: f64, p_max: f64) -> Result<f64, PneumaticError> {
    if !(p_max > 0.0) {
        return Err(PneumaticError::InvalidSpec("p_max: must be > 0".into()));
    }
    check_range(p, p_max)?;
    Ok(shape_factor_unchecked(p, p_max))
}

#[inline]
pub(crate) fn shape_factor_unchecked(p: f64, p_max: f64) -> f64 {
    let r = p / p_max;
    r / (2.0 * PI) * (PI - (PI - 2.0) * r)
}

/// Volume of one bag at gauge pressure `p`, including its residual volume.
pub fn airbag_volume(p: f64, spec: &AirbagSpec) -> Result<f64, PneumaticError> {
    spec.check_pressure(p)?;
    Ok(spec.chamber_sum() * shape_factor_unchecked(p, spec.p_max) + spec.v_res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn shape_factor_endpoints() {
        assert_eq!(shape_factor(0.0, 80.0).unwrap(), 0.0);
        assert_relative_eq!(shape_factor(80.0, 80.0).unwrap(), 1.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn shape_factor_half_pressure() {
        // r = 0.5: 0.5/(2π)·(π − (π−2)/2) = 0.25 − (π−2)/(8π)
        let want = 0.25 - (PI - 2.0) / (8.0 * PI);
        let got = shape_factor(40.0, 80.0).unwrap();
        assert_relative_eq!(got, want, epsilon = 1e-15);
        assert!((got - 0.20458).abs() < 1e-5);
    }

    #[test]
    fn shape_factor_rejects_out_of_range() {
        assert!(matches!(shape_factor(-1.0, 80.0), Err(PneumaticError::Domain { .. })));
        assert!(matches!(shape_factor(80.5, 80.0), Err(PneumaticError::Domain { .. })));
        assert!(shape_factor(f64::NAN, 80.0).is_err());
    }

    #[test]
    fn joint_volume_points() {
        let j = AirbagSpec::prototype_joint();
        assert_eq!(airbag_volume(0.0, &j).unwrap(), 1587.0);
        let full = airbag_volume(80.0, &j).unwrap();
        assert_relative_eq!(full, 30.0 * 30.0 * 20.0 / PI + 1587.0, epsilon = 1e-9);
        assert!((full - 7316.6).abs() < 0.1);
    }

    #[test]
    fn joint_volume_matches_rounded_polynomial() {
        let j = AirbagSpec::prototype_joint();
        for i in 1..=80 {
            let p = i as f64;
            let v = airbag_volume(p, &j).unwrap();
            let approx = -0.511 * p * p + 112.5 * p + 1587.0;
            assert!(((v - approx) / v).abs() < 0.002, "p={p}: {v} vs {approx}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut j = AirbagSpec::prototype_joint();
        j.segment_short_sides.clear();
        assert!(j.validate().is_err());
        let mut j = AirbagSpec::prototype_joint();
        j.v_res = -1.0;
        assert!(j.validate().is_err());
        assert!(AirbagSpec::prototype_bottom().validate().is_ok());
    }

    proptest! {
        #[test]
        fn shape_factor_monotone_and_bounded(a in 0.0f64..80.0, b in 0.0f64..80.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            let f_lo = shape_factor(lo, 80.0).unwrap();
            let f_hi = shape_factor(hi, 80.0).unwrap();
            prop_assert!(f_lo < f_hi);
            prop_assert!(f_hi <= 1.0 / PI + 1e-15);
        }

        #[test]
        fn polynomial_agrees_with_volume(p in 0.0f64..80.0) {
            let b = AirbagSpec::prototype_bottom();
            let v = airbag_volume(p, &b).unwrap();
            let poly = b.volume_polynomial().eval(p);
            prop_assert!((v - poly).abs() <= 1e-9 * v.max(1.0));
        }
    }
}
