use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{Matrix3, Rotation3, Vector3, Vector4};

use super::rotor::{allocation_matrix, Allocation, RotorConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    /// World-frame position, m (z up).
    pub r: Vector3<f64>,
    /// (φ, θ, ψ), rad; `R = Rz(ψ)·Ry(θ)·Rx(φ)`.
    pub euler: Vector3<f64>,
    /// World-frame velocity, m/s.
    pub v: Vector3<f64>,
    /// Body angular velocity, rad/s.
    pub omega: Vector3<f64>,
}

impl Default for RigidBodyState {
    fn default() -> Self {
        Self {
            r: Vector3::zeros(),
            euler: Vector3::zeros(),
            v: Vector3::zeros(),
            omega: Vector3::zeros(),
        }
    }
}

impl RigidBodyState {
    pub fn at(r: Vector3<f64>) -> Self {
        Self { r, ..Self::default() }
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.euler.x, self.euler.y, self.euler.z)
    }

    /// Roll and pitch inside ±π/4, where Euler rates and body rates are
    /// interchangeable.
    pub fn near_hover(&self) -> bool {
        self.euler.x.abs() < FRAC_PI_4 && self.euler.y.abs() < FRAC_PI_4
    }

    fn add_scaled(&self, d: &Derivative, h: f64) -> Self {
        Self {
            r: self.r + d.r * h,
            euler: self.euler + d.euler * h,
            v: self.v + d.v * h,
            omega: self.omega + d.omega * h,
        }
    }
}

/// Plant constants. `rotors` is the true (possibly deformed) layout.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyParams {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub g: f64,
    pub rotors: Vec<RotorConfig>,
}

impl BodyParams {
    /// Box-model inertia of a uniform cuboid with the given side lengths.
    pub fn box_inertia(mass: f64, lx: f64, ly: f64, lz: f64) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(
            mass * (ly * ly + lz * lz) / 12.0,
            mass * (lx * lx + lz * lz) / 12.0,
            mass * (lx * lx + ly * ly) / 12.0,
        ))
    }

    pub fn allocation(&self) -> Allocation {
        allocation_matrix(&self.rotors)
    }
}

#[derive(Debug, Clone, Copy)]
struct Derivative {
    r: Vector3<f64>,
    euler: Vector3<f64>,
    v: Vector3<f64>,
    omega: Vector3<f64>,
}

fn derivative(
    s: &RigidBodyState,
    q: &Allocation,
    inertia: &Matrix3<f64>,
    inv_inertia: &Matrix3<f64>,
    mass: f64,
    g: f64,
    thrusts: &Vector4<f64>,
) -> Derivative {
    let w = q * thrusts;
    let f = w.fixed_rows::<3>(0).into_owned();
    let tau = w.fixed_rows::<3>(3).into_owned();
    let acc = s.rotation() * f / mass - Vector3::new(0.0, 0.0, g);
    let gyro = s.omega.cross(&(inertia * s.omega));
    Derivative {
        r: s.v,
        euler: s.omega,
        v: acc,
        omega: inv_inertia * (tau - gyro),
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// One RK4 step with thrusts held over the step. Negative thrusts are
/// treated as zero.
pub fn dynamics_step(state: &RigidBodyState, thrusts: &Vector4<f64>, params: &BodyParams, dt: f64) -> RigidBodyState {
    let q = params.allocation();
    let inv = params.inertia.try_inverse().expect("inertia must be invertible");
    let lam = thrusts.map(|l| l.max(0.0));
    let f = |s: &RigidBodyState| derivative(s, &q, &params.inertia, &inv, params.mass, params.g, &lam);
    let k1 = f(state);
    let k2 = f(&state.add_scaled(&k1, dt / 2.0));
    let k3 = f(&state.add_scaled(&k2, dt / 2.0));
    let k4 = f(&state.add_scaled(&k3, dt));
    let mut out = *state;
    out.r += (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r) * dt / 6.0;
    out.euler += (k1.euler + 2.0 * k2.euler + 2.0 * k3.euler + k4.euler) * dt / 6.0;
    out.v += (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v) * dt / 6.0;
    out.omega += (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega) * dt / 6.0;
    out.euler = out.euler.map(wrap_angle);
    out
}
