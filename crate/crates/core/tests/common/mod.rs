//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use nalgebra::{DMatrix, Vector3, Vector4};
use perch_core::config::RobotConfig;
use perch_core::flight::{
    allocation_matrix, dynamics_step, BodyParams, FlightController, FlightSetpoint, RigidBodyState, ThrustLimits,
};

pub struct Flight {
    pub cfg: RobotConfig,
    pub plant: BodyParams,
    pub ctrl: FlightController,
}

/// Prototype airframe with an optional outward tilt of one rotor in the
/// plant only; the controller keeps the nominal allocation.
pub fn flight(tilt: Option<(usize, f64)>) -> Flight {
    let cfg = RobotConfig::default();
    let mut rotors = cfg.flight.rotors.clone();
    if let Some((i, a)) = tilt {
        rotors[i] = rotors[i].tilted_outward(a);
    }
    let plant = BodyParams {
        mass: cfg.mass.total(),
        inertia: cfg.flight.inertia(),
        g: cfg.mass.g,
        rotors,
    };
    let limits = ThrustLimits {
        min: cfg.thrust_floor(),
        max: cfg.flight.thrust_max,
    };
    let q = allocation_matrix(&cfg.flight.rotors);
    let ctrl = FlightController::new(cfg.flight.gains.clone(), limits, plant.mass, plant.g, plant.inertia, &q).unwrap();
    Flight { cfg, plant, ctrl }
}

/// Closed-loop hover about `target`; `efficiency` scales each rotor's
/// delivered thrust. Returns (t, state) after every step.
pub fn fly(
    f: &mut Flight,
    start: RigidBodyState,
    target: Vector3<f64>,
    efficiency: Vector4<f64>,
    duration: f64,
    dt: f64,
) -> Vec<(f64, RigidBodyState)> {
    let sp = FlightSetpoint::hold(target);
    let mut s = start;
    let n = (duration / dt).round() as usize;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let u = f.ctrl.update(&s, &sp, dt).unwrap().thrusts;
        s = dynamics_step(&s, &u.component_mul(&efficiency), &f.plant, dt);
        out.push(((k + 1) as f64 * dt, s));
    }
    out
}

/// First time after which roll and pitch stay below `band`.
pub fn settle_time(traj: &[(f64, RigidBodyState)], band: f64) -> Option<f64> {
    let last_out = traj
        .iter()
        .rposition(|(_, s)| s.euler.x.abs() >= band || s.euler.y.abs() >= band);
    match last_out {
        None => Some(0.0),
        Some(i) if i + 1 < traj.len() => Some(traj[i].0),
        Some(_) => None,
    }
}

/// Kleinman policy iteration with a Kronecker-product Lyapunov solve,
/// started from a stabilizing gain.
pub fn policy_iteration(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    k0: DMatrix<f64>,
) -> DMatrix<f64> {
    let dim = a.nrows();
    let n_inv = n.clone().try_inverse().unwrap();
    let eye = DMatrix::<f64>::identity(dim, dim);
    let mut k = k0;
    let mut p = DMatrix::zeros(dim, dim);
    for _ in 0..200 {
        let ac = a - b * &k;
        // Acᵀ P + P Ac = −(M + Kᵀ N K), vectorized column-major.
        let rhs = -(m + k.transpose() * n * &k);
        let lhs = eye.kronecker(&ac.transpose()) + ac.transpose().kronecker(&eye);
        let vec_rhs = DMatrix::from_column_slice(dim * dim, 1, rhs.as_slice());
        let sol = lhs.lu().solve(&vec_rhs).unwrap();
        let p_next = DMatrix::from_column_slice(dim, dim, sol.as_slice());
        let p_next = (&p_next + p_next.transpose()) * 0.5;
        let change = (&p_next - &p).abs().max();
        p = p_next;
        k = &n_inv * b.transpose() * &p;
        if change < 1e-14 * (1.0 + p.abs().max()) {
            break;
        }
    }
    p
}

pub fn energy(s: &RigidBodyState, p: &BodyParams) -> f64 {
    0.5 * p.mass * s.v.norm_squared() + p.mass * p.g * s.r.z + 0.5 * s.omega.dot(&(p.inertia * s.omega))
}
