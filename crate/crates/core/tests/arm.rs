use perch_core::arm::{
    fit_torque_coefficients, hinge_torque, hover_thrust_check, ArmGeometry, MassBudget, TorqueCoefficients,
    TorqueSample,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn grid(geom: &ArmGeometry, c: &TorqueCoefficients) -> Vec<TorqueSample> {
    let mut out = Vec::new();
    for deg in [0.0f64, 20.0, 30.0, 40.0, 60.0] {
        for i in 0..8 {
            let (theta, p0) = (deg.to_radians(), 10.0 * i as f64);
            out.push(TorqueSample {
                theta,
                p0,
                torque: hinge_torque(theta, p0, geom, c),
            });
        }
    }
    out
}

#[test]
fn prefactors() {
    let g = ArmGeometry::default();
    assert!((g.pressure_prefactor() / 3.888e-6 - 1.0).abs() < 0.005);
    assert!((g.gradient_prefactor() / 5.054e-8 - 1.0).abs() < 0.005);
}

#[test]
fn noiseless_fit_recovers_coefficients() {
    let g = ArmGeometry::default();
    let c = TorqueCoefficients::default();
    let fit = fit_torque_coefficients(&grid(&g, &c), &g).unwrap();
    assert!(fit.residual_norm() < 1e-10);
    assert!((fit.coeffs.k0 - c.k0).abs() < 1e-8);
    assert!((fit.coeffs.k1 - c.k1).abs() < 1e-8);
    assert!((fit.coeffs.k2 - c.k2).abs() < 1e-5);
}

#[test]
fn noisy_fit_is_unbiased_within_reported_errors() {
    let g = ArmGeometry::default();
    let c = TorqueCoefficients::default();
    let clean = grid(&g, &c);
    let noise = Normal::new(0.0, 1e-4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 200;
    let mut inside = 0;
    let mut mean_k0 = 0.0;
    for _ in 0..trials {
        let noisy: Vec<TorqueSample> = clean
            .iter()
            .map(|s| TorqueSample {
                torque: s.torque + noise.sample(&mut rng),
                ..*s
            })
            .collect();
        let fit = fit_torque_coefficients(&noisy, &g).unwrap();
        let se = fit.std_errors.unwrap();
        mean_k0 += fit.coeffs.k0 / trials as f64;
        if (fit.coeffs.k0 - c.k0).abs() < 2.0 * se[0] {
            inside += 1;
        }
    }
    // Roughly 95% of 2-sigma intervals should cover the truth.
    assert!(inside as f64 / trials as f64 > 0.88, "{inside}/{trials}");
    assert!((mean_k0 - c.k0).abs() < 1e-3, "{mean_k0}");
}

#[test]
fn prototype_hover_keeps_arm_rigid() {
    let h = hover_thrust_check(&MassBudget::default());
    assert!(h.rigid && h.mass_relation_holds);
    assert!(h.lambda_hover > h.rigidity_thrust);
}
