mod common;

use common::{energy, flight, fly, policy_iteration, settle_time};
use nalgebra::{DMatrix, Vector3, Vector4, Vector6};
use perch_core::flight::{dynamics_step, solve_riccati, synthesize_lqi, RigidBodyState};

const DT: f64 = 1e-3;

fn tilted(phi: f64, theta: f64) -> RigidBodyState {
    let mut s = RigidBodyState::at(Vector3::new(0.0, 0.0, 1.0));
    s.euler = Vector3::new(phi, theta, 0.0);
    s
}

#[test]
fn hover_fixed_point() {
    let f = flight(None);
    let q = f.plant.allocation();
    let lam = q.pseudo_inverse(1e-12).unwrap() * Vector6::new(0.0, 0.0, f.plant.mass * f.plant.g, 0.0, 0.0, 0.0);
    let mut s = RigidBodyState::at(Vector3::new(0.3, -0.2, 1.0));
    let s0 = s;
    for _ in 0..5000 {
        s = dynamics_step(&s, &lam, &f.plant, DT);
    }
    assert!((s.r - s0.r).abs().max() < 1e-9, "{:?}", s.r - s0.r);
    assert!(s.v.abs().max() < 1e-9 && s.omega.abs().max() < 1e-9 && s.euler.abs().max() < 1e-9);
}

#[test]
fn recovers_from_large_attitude_error() {
    let mut f = flight(None);
    let traj = fly(
        &mut f,
        tilted(0.4, -0.5),
        Vector3::new(0.0, 0.0, 1.0),
        Vector4::repeat(1.0),
        5.0,
        DT,
    );
    let t = settle_time(&traj, 0.05).expect("settles");
    assert!(t < 3.0, "settled at {t}");
    assert!(traj.iter().all(|(_, s)| s.near_hover()));
}

#[test]
fn tilted_rotor_converges() {
    let mut f = flight(Some((0, 0.3)));
    let target = Vector3::new(0.0, 0.0, 1.0);
    let traj = fly(&mut f, tilted(0.4, -0.5), target, Vector4::repeat(1.0), 20.0, DT);
    // The tilted thrust line needs a steady lean, so convergence is judged on
    // position, velocity and body rate, plus a settled attitude.
    let (_, last) = traj.last().unwrap();
    assert!((last.r - target).norm() < 0.01, "{:?}", last.r);
    assert!(last.v.norm() < 1e-3 && last.omega.norm() < 1e-3);
    let (_, earlier) = traj[traj.len() - 2001];
    assert!((last.euler - earlier.euler).norm() < 1e-3);
    assert!(traj.iter().all(|(_, s)| s.near_hover()));
}

#[test]
fn integral_action_rejects_weak_motor() {
    let mut f = flight(None);
    let target = Vector3::new(0.0, 0.0, 1.0);
    let eff = Vector4::new(0.85, 1.0, 1.0, 1.0);
    let traj = fly(&mut f, RigidBodyState::at(target), target, eff, 20.0, DT);
    let (_, last) = traj.last().unwrap();
    assert!((last.r - target).norm() < 0.01, "{:?}", last.r);
    assert!(last.euler.xy().norm() < 0.01, "{:?}", last.euler);
}

#[test]
fn free_flight_conserves_energy() {
    let f = flight(None);
    let mut s = tilted(0.2, 0.1);
    s.v = Vector3::new(0.5, -0.3, 2.0);
    s.omega = Vector3::new(0.3, -0.2, 0.4);
    let e0 = energy(&s, &f.plant);
    for _ in 0..2000 {
        s = dynamics_step(&s, &Vector4::zeros(), &f.plant, DT);
    }
    let e1 = energy(&s, &f.plant);
    assert!(((e1 - e0) / e0).abs() < 1e-6, "{e0} -> {e1}");
}

#[test]
fn riccati_scalar_matches_closed_form() {
    for (a, b, m, n) in [(1.0, 1.0, 1.0, 1.0), (-0.5, 2.0, 3.0, 0.7), (2.0, 0.3, 10.0, 0.1)] {
        let sol = solve_riccati(
            &DMatrix::from_element(1, 1, a),
            &DMatrix::from_element(1, 1, b),
            &[m],
            &[n],
        )
        .unwrap();
        let want = (a + (a * a + b * b * m / n).sqrt()) * n / (b * b);
        assert!((sol.p[(0, 0)] - want).abs() < 1e-8, "{} vs {want}", sol.p[(0, 0)]);
    }
}

#[test]
fn riccati_double_integrator_matches_oracles() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    for (q1, q2, r) in [(1.0, 1.0, 1.0), (40.0, 2.0, 0.5), (0.1, 5.0, 3.0)] {
        let sol = solve_riccati(&a, &b, &[q1, q2], &[r]).unwrap();
        let p12 = (q1 * r).sqrt();
        let p22 = (r * (q2 + 2.0 * p12)).sqrt();
        let closed = DMatrix::from_row_slice(2, 2, &[p12 * p22 / r, p12, p12, p22]);
        assert!((&sol.p - &closed).abs().max() < 1e-8, "{}", sol.p);
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![q1, q2]));
        let n = DMatrix::from_element(1, 1, r);
        let pi = policy_iteration(&a, &b, &m, &n, DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
        assert!((&sol.p - &pi).abs().max() < 1e-8);
    }
}

#[test]
fn attitude_design_certificate() {
    let f = flight(None);
    let q = perch_core::flight::allocation_matrix(&f.cfg.flight.rotors);
    let d = synthesize_lqi(&f.plant.inertia, &q, &f.cfg.flight.gains).unwrap();
    assert!(d.riccati.residual <= 1e-8);
    let eig = d.riccati.closed_loop_eigenvalues(&d.a, &d.b);
    assert!(eig.iter().all(|l| l.re < 0.0), "{eig:?}");
    // Independent cross-check of the 9-state design.
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&f.cfg.flight.gains.m_weights));
    let n = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&f.cfg.flight.gains.n_weights));
    let pi = policy_iteration(&d.a, &d.b, &m, &n, d.riccati.k.clone() * 1.0);
    assert!((&d.riccati.p - &pi).abs().max() < 1e-6 * pi.abs().max());
}
