use nalgebra::{SMatrix, Unit, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

pub type Allocation = SMatrix<f64, 6, 4>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorConfig {
    /// Body-frame position, m.
    pub position: [f64; 3],
    /// Body-frame thrust direction; normalized on use.
    pub direction: [f64; 3],
    /// Reaction torque per unit thrust, m. Sign gives the spin direction.
    pub drag_rate: f64,
}

impl RotorConfig {
    pub fn p(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }

    pub fn u(&self) -> Vector3<f64> {
        Vector3::from(self.direction).normalize()
    }

    /// Body torque per unit thrust.
    pub fn moment_arm(&self) -> Vector3<f64> {
        let u = self.u();
        self.p().cross(&u) + self.drag_rate * u
    }

    /// Same rotor with its thrust axis tipped by `angle` away from the body
    /// centre (the shape of a sagging arm).
    pub fn tilted_outward(&self, angle: f64) -> Self {
        let p = self.p();
        let radial = Vector3::new(p.x, p.y, 0.0);
        let axis = if radial.norm() > 0.0 {
            Unit::new_normalize(Vector3::z().cross(&radial))
        } else {
            Vector3::x_axis()
        };
        let rot = nalgebra::Rotation3::from_axis_angle(&axis, angle);
        let u = rot * self.u();
        Self {
            direction: [u.x, u.y, u.z],
            ..self.clone()
        }
    }
}

/// X layout: rotors at (±half_span, ±half_span, 0), thrust along +z,
/// alternating spin.
pub fn x_layout(half_span: f64, drag_rate: f64) -> Vec<RotorConfig> {
    [(1.0, 1.0, 1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0), (1.0, -1.0, -1.0)]
        .iter()
        .map(|&(sx, sy, spin)| RotorConfig {
            position: [sx * half_span, sy * half_span, 0.0],
            direction: [0.0, 0.0, 1.0],
            drag_rate: spin * drag_rate,
        })
        .collect()
}

/// Thrusts-to-wrench map `[f; τ] = Q·λ` in the body frame.
pub fn allocation_matrix(rotors: &[RotorConfig]) -> Allocation {
    assert_eq!(rotors.len(), 4, "allocation needs exactly four rotors");
    let mut q = Allocation::zeros();
    for (i, r) in rotors.iter().enumerate() {
        q.fixed_view_mut::<3, 1>(0, i).copy_from(&r.u());
        q.fixed_view_mut::<3, 1>(3, i).copy_from(&r.moment_arm());
    }
    q
}

/// Sum-form wrench, used to cross-check the matrix.
pub fn wrench(rotors: &[RotorConfig], thrusts: &Vector4<f64>) -> Vector6<f64> {
    let mut f = Vector3::zeros();
    let mut tau = Vector3::zeros();
    for (r, &l) in rotors.iter().zip(thrusts.iter()) {
        let u = r.u();
        f += u * l;
        tau += r.p().cross(&(u * l)) + r.drag_rate * u * l;
    }
    Vector6::new(f.x, f.y, f.z, tau.x, tau.y, tau.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_layout_structure() {
        let q = allocation_matrix(&x_layout(0.09, 0.016));
        for i in 0..4 {
            assert_eq!(q.fixed_view::<3, 1>(0, i).into_owned(), Vector3::z());
        }
        let s = 0.016;
        for (i, want) in [s, -s, s, -s].iter().enumerate() {
            assert!((q[(5, i)] - want).abs() < 1e-15);
        }
        let w = q * Vector4::repeat(2.0);
        assert!((w - Vector6::new(0.0, 0.0, 8.0, 0.0, 0.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn tilt_reduces_vertical_column() {
        let mut r = x_layout(0.09, 0.016);
        r[0] = r[0].tilted_outward(0.3);
        let q = allocation_matrix(&r);
        assert!((q[(2, 0)] - 0.3f64.cos()).abs() < 1e-12);
        // Outward: horizontal part points along the arm.
        assert!(q[(0, 0)] > 0.0 && q[(1, 0)] > 0.0);
    }

    proptest! {
        #[test]
        fn matrix_matches_sum_form(l in proptest::array::uniform4(0.0f64..8.0), tilt in 0.0f64..0.3) {
            let mut r = x_layout(0.09, 0.016);
            r[2] = r[2].tilted_outward(tilt);
            let lam = Vector4::from(l);
            let a = allocation_matrix(&r) * lam;
            let b = wrench(&r, &lam);
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
    }
}
