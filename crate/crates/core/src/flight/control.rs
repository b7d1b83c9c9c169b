//! Cascade flight control: PID position loop producing a desired force,
//! force-to-attitude conversion, and an LQI attitude loop producing rotor
//! thrust corrections.

use nalgebra::{DMatrix, Matrix3, Rotation3, SMatrix, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use super::dynamics::{wrap_angle, RigidBodyState};
use super::riccati::{solve_riccati, RiccatiError, RiccatiSolution};
use super::rotor::Allocation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    /// State weights in the order φ, ωx, θ, ωy, ψ, ωz, ∫φ, ∫θ, ∫ψ.
    pub m_weights: [f64; 9],
    /// Per-rotor input weights.
    pub n_weights: [f64; 4],
    pub kp_r: [f64; 3],
    pub ki_r: [f64; 3],
    pub kd_r: [f64; 3],
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            m_weights: [40.0, 1.0, 40.0, 1.0, 10.0, 1.0, 20.0, 20.0, 2.0],
            n_weights: [1.0; 4],
            kp_r: [1.2, 1.2, 4.0],
            ki_r: [0.35, 0.35, 0.8],
            kd_r: [1.6, 1.6, 3.0],
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), String> {
        let named: [(&str, &[f64]); 5] = [
            ("m_weights", &self.m_weights),
            ("n_weights", &self.n_weights),
            ("kp_r", &self.kp_r),
            ("ki_r", &self.ki_r),
            ("kd_r", &self.kd_r),
        ];
        for (name, v) in named {
            if let Some(i) = v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(format!("{name}[{i}]: must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThrustLimits {
    /// N per rotor.
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("desired force has no upward component after yaw removal (f_z = {0})")]
    InfeasibleAttitude(f64),
    #[error(transparent)]
    Synthesis(#[from] RiccatiError),
}

/// Linearized attitude plant `(Ā, B̄)` with integral states appended.
pub fn attitude_model(inertia: &Matrix3<f64>, q_rot: &SMatrix<f64, 3, 4>) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = DMatrix::zeros(9, 9);
    for axis in 0..3 {
        a[(2 * axis, 2 * axis + 1)] = 1.0;
        a[(6 + axis, 2 * axis)] = 1.0;
    }
    let inv = inertia.try_inverse().expect("inertia must be invertible");
    let bw = inv * q_rot;
    let mut b = DMatrix::zeros(9, 4);
    for axis in 0..3 {
        for j in 0..4 {
            b[(2 * axis + 1, j)] = bw[(axis, j)];
        }
    }
    (a, b)
}

#[derive(Debug, Clone)]
pub struct LqiDesign {
    pub k: SMatrix<f64, 4, 9>,
    pub q_rot_pinv: SMatrix<f64, 4, 3>,
    pub riccati: RiccatiSolution,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

pub fn synthesize_lqi(
    inertia: &Matrix3<f64>,
    q_nominal: &Allocation,
    gains: &ControllerGains,
) -> Result<LqiDesign, RiccatiError> {
    let q_rot: SMatrix<f64, 3, 4> = q_nominal.fixed_rows::<3>(3).into_owned();
    let (a, b) = attitude_model(inertia, &q_rot);
    let riccati = solve_riccati(&a, &b, &gains.m_weights, &gains.n_weights)?;
    let k = SMatrix::<f64, 4, 9>::from_iterator(riccati.k.iter().copied());
    let q_rot_pinv = q_rot.pseudo_inverse(1e-12).expect("pseudo-inverse of a 3x4 matrix");
    Ok(LqiDesign {
        k,
        q_rot_pinv,
        riccati,
        a,
        b,
    })
}

/// Attitude errors `(φ−φd, θ−θd, ψ−ψd)`, each wrapped.
fn attitude_error(state: &RigidBodyState, setpoint: &Vector3<f64>) -> Vector3<f64> {
    (state.euler - setpoint).map(wrap_angle)
}

/// LQI thrust corrections and the integral advanced by `dt`.
pub fn lqi_attitude_control(
    state: &RigidBodyState,
    setpoint: &Vector3<f64>,
    integral: &Vector3<f64>,
    design: &LqiDesign,
    inertia: &Matrix3<f64>,
    dt: f64,
) -> (Vector4<f64>, Vector3<f64>) {
    let e = attitude_error(state, setpoint);
    let w = state.omega;
    let x =
        SMatrix::<f64, 9, 1>::from_column_slice(&[e.x, w.x, e.y, w.y, e.z, w.z, integral.x, integral.y, integral.z]);
    let gyro = w.cross(&(inertia * w));
    let lam = -design.k * x + design.q_rot_pinv * gyro;
    (lam, integral + e * dt)
}

/// World-frame desired force `m(g·e_z + Kp·e + Ki·∫e + Kd·ė)`.
pub fn pid_world_force(
    state: &RigidBodyState,
    r_des: &Vector3<f64>,
    v_des: &Vector3<f64>,
    integral: &Vector3<f64>,
    gains: &ControllerGains,
    mass: f64,
    g: f64,
) -> Vector3<f64> {
    let e = r_des - state.r;
    let de = v_des - state.v;
    let kp = Vector3::from(gains.kp_r);
    let ki = Vector3::from(gains.ki_r);
    let kd = Vector3::from(gains.kd_r);
    mass * (Vector3::new(0.0, 0.0, g) + kp.component_mul(&e) + ki.component_mul(integral) + kd.component_mul(&de))
}

/// Desired force in the body frame, `R⁻¹·f_world`.
pub fn pid_position_control(
    state: &RigidBodyState,
    r_des: &Vector3<f64>,
    integral: &Vector3<f64>,
    gains: &ControllerGains,
    mass: f64,
    g: f64,
) -> Vector3<f64> {
    let f = pid_world_force(state, r_des, &Vector3::zeros(), integral, gains, mass, g);
    state.rotation().inverse() * f
}

/// Roll and pitch that align the thrust axis with `f` for heading `psi`.
pub fn force_to_attitude(f: &Vector3<f64>, psi: f64) -> Result<(f64, f64), ControlError> {
    let fb = Rotation3::from_axis_angle(&Vector3::z_axis(), psi).inverse() * f;
    if !(fb.z > 0.0) {
        return Err(ControlError::InfeasibleAttitude(fb.z));
    }
    let phi = (-fb.y).atan2((fb.x * fb.x + fb.z * fb.z).sqrt());
    let theta = fb.x.atan2(fb.z);
    Ok((phi, theta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightSetpoint {
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
    pub psi: f64,
}

impl FlightSetpoint {
    pub fn hold(r: Vector3<f64>) -> Self {
        Self {
            r,
            v: Vector3::zeros(),
            psi: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub thrusts: Vector4<f64>,
    pub attitude_des: Vector3<f64>,
    pub saturated: bool,
}

/// Position PID over LQI attitude, using the constant nominal allocation.
#[derive(Debug, Clone)]
pub struct FlightController {
    pub design: LqiDesign,
    pub gains: ControllerGains,
    pub limits: ThrustLimits,
    pub mass: f64,
    pub g: f64,
    pub inertia: Matrix3<f64>,
    /// Largest commanded roll/pitch, rad.
    pub max_tilt: f64,
    q_pinv: SMatrix<f64, 4, 6>,
    pos_integral: Vector3<f64>,
    att_integral: Vector3<f64>,
}

impl FlightController {
    pub fn new(
        gains: ControllerGains,
        limits: ThrustLimits,
        mass: f64,
        g: f64,
        inertia: Matrix3<f64>,
        q_nominal: &Allocation,
    ) -> Result<Self, ControlError> {
        let design = synthesize_lqi(&inertia, q_nominal, &gains)?;
        let q_pinv = q_nominal.pseudo_inverse(1e-12).expect("pseudo-inverse of a 6x4 matrix");
        Ok(Self {
            design,
            gains,
            limits,
            mass,
            g,
            inertia,
            max_tilt: 0.6,
            q_pinv,
            pos_integral: Vector3::zeros(),
            att_integral: Vector3::zeros(),
        })
    }

    pub fn reset(&mut self) {
        self.pos_integral = Vector3::zeros();
        self.att_integral = Vector3::zeros();
    }

    pub fn update(
        &mut self,
        state: &RigidBodyState,
        sp: &FlightSetpoint,
        dt: f64,
    ) -> Result<ControlOutput, ControlError> {
        let mut f = pid_world_force(state, &sp.r, &sp.v, &self.pos_integral, &self.gains, self.mass, self.g);
        // Never ask for less than a fifth of gravity upward.
        f.z = f.z.max(0.2 * self.mass * self.g);
        let (phi, theta) = force_to_attitude(&f, sp.psi)?;
        let att_des = Vector3::new(
            phi.clamp(-self.max_tilt, self.max_tilt),
            theta.clamp(-self.max_tilt, self.max_tilt),
            sp.psi,
        );

        let (lam_rot, att_next) =
            lqi_attitude_control(state, &att_des, &self.att_integral, &self.design, &self.inertia, dt);
        let collective = f.dot(&(state.rotation() * Vector3::z())).max(0.0);
        let base = self.q_pinv * Vector6::new(0.0, 0.0, collective, 0.0, 0.0, 0.0);
        let raw = base + lam_rot;
        let thrusts = raw.map(|l| l.clamp(self.limits.min, self.limits.max));
        let saturated = thrusts != raw;
        if !saturated {
            self.att_integral = att_next;
            self.pos_integral += (sp.r - state.r) * dt;
        }
        Ok(ControlOutput {
            thrusts,
            attitude_des: att_des,
            saturated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight::dynamics::BodyParams;
    use crate::flight::rotor::{allocation_matrix, x_layout};

    fn setup() -> (Matrix3<f64>, Allocation) {
        (
            BodyParams::box_inertia(1.444, 0.35, 0.35, 0.25),
            allocation_matrix(&x_layout(0.09, 0.016)),
        )
    }

    #[test]
    fn zero_error_gives_zero_correction() {
        let (i, q) = setup();
        let d = synthesize_lqi(&i, &q, &ControllerGains::default()).unwrap();
        let (lam, v) = lqi_attitude_control(
            &RigidBodyState::default(),
            &Vector3::zeros(),
            &Vector3::zeros(),
            &d,
            &i,
            1e-3,
        );
        assert!(lam.norm() < 1e-15 && v.norm() == 0.0);
    }

    #[test]
    fn yaw_error_uses_spin_pairs() {
        let (i, q) = setup();
        let d = synthesize_lqi(&i, &q, &ControllerGains::default()).unwrap();
        let mut s = RigidBodyState::default();
        s.euler.z = 0.1;
        let (lam, _) = lqi_attitude_control(&s, &Vector3::zeros(), &Vector3::zeros(), &d, &i, 1e-3);
        // Positive yaw error needs negative yaw torque: rotors with σ > 0 drop.
        assert!(lam[0] < 0.0 && lam[2] < 0.0 && lam[1] > 0.0 && lam[3] > 0.0, "{lam}");
        assert!((lam[0] - lam[2]).abs() < 1e-9 && (lam[1] - lam[3]).abs() < 1e-9);
        assert!((lam[0] + lam[1]).abs() < 1e-9);
    }

    #[test]
    fn synthesis_certificate() {
        let (i, q) = setup();
        let d = synthesize_lqi(&i, &q, &ControllerGains::default()).unwrap();
        assert!(d.riccati.residual <= 1e-8);
        assert!(d.riccati.closed_loop_eigenvalues(&d.a, &d.b).iter().all(|e| e.re < 0.0));
    }

    #[test]
    fn pid_examples() {
        let g = ControllerGains::default();
        let s = RigidBodyState::default();
        let f = pid_position_control(&s, &Vector3::zeros(), &Vector3::zeros(), &g, 1.444, 9.81);
        assert!((f - Vector3::new(0.0, 0.0, 1.444 * 9.81)).norm() < 1e-12);
        let f = pid_position_control(&s, &Vector3::new(0.5, 0.0, 0.0), &Vector3::zeros(), &g, 1.444, 9.81);
        assert!((f.x - 1.444 * g.kp_r[0] * 0.5).abs() < 1e-12 && f.y == 0.0);

        let mut rolled = RigidBodyState::default();
        rolled.euler.x = 0.2;
        let f = pid_position_control(&rolled, &Vector3::zeros(), &Vector3::zeros(), &g, 1.0, 9.81);
        let want = Vector3::new(0.0, 9.81 * 0.2f64.sin(), 9.81 * 0.2f64.cos());
        assert!((f - want).norm() < 1e-12, "{f}");
    }

    #[test]
    fn attitude_from_force() {
        assert_eq!(
            force_to_attitude(&Vector3::new(0.0, 0.0, 14.0), 1.3).unwrap(),
            (0.0, 0.0)
        );
        let (phi, theta) = force_to_attitude(&Vector3::new(1.0, 0.0, 10.0), 0.0).unwrap();
        assert!(phi.abs() < 1e-15 && (theta - 0.1f64.atan2(1.0)).abs() < 1e-15);
        assert!((theta - 0.0997).abs() < 1e-4);
        let (phi2, theta2) = force_to_attitude(&Vector3::new(0.0, 1.0, 10.0), std::f64::consts::FRAC_PI_2).unwrap();
        assert!((theta2 - theta).abs() < 1e-12 && phi2.abs() < 1e-12);
        assert!(force_to_attitude(&Vector3::new(1.0, 0.0, 0.0), 0.0).is_err());
    }
}
