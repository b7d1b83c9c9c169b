//! Continuous-time algebraic Riccati equation
//! `AᵀP + PA − P·B·N⁻¹·Bᵀ·P + M = 0`.
//!
//! A matrix-sign-function iteration on the Hamiltonian gives a first
//! solution; Newton-Kleinman steps (Lyapunov solves by Kronecker
//! vectorization) then polish it to the requested residual.

use nalgebra::{Complex, DMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RiccatiError {
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("weights must be strictly positive: {0}")]
    Weights(String),
    #[error("no stabilizing solution after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: DMatrix<f64>,
    /// `N⁻¹·Bᵀ·P`; the optimal input is `−K·x`.
    pub k: DMatrix<f64>,
    /// Frobenius norm of the Riccati residual.
    pub residual: f64,
    pub iterations: usize,
}

impl RiccatiSolution {
    pub fn closed_loop_eigenvalues(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<Complex<f64>> {
        (a - b * &self.k).complex_eigenvalues().iter().copied().collect()
    }
}

pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    n_inv: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    (a.transpose() * p + p * a - p * b * n_inv * b.transpose() * p + m).norm()
}

/// Diagonal-weight entry point.
pub fn solve_riccati(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    m_weights: &[f64],
    n_weights: &[f64],
) -> Result<RiccatiSolution, RiccatiError> {
    if let Some(w) = m_weights.iter().chain(n_weights).find(|w| !(**w > 0.0)) {
        return Err(RiccatiError::Weights(format!("{w}")));
    }
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(m_weights));
    let n = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(n_weights));
    care(a, b, &m, &n, 1e-10)
}

pub fn care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    tol: f64,
) -> Result<RiccatiSolution, RiccatiError> {
    let dim = a.nrows();
    if a.ncols() != dim || b.nrows() != dim || m.shape() != (dim, dim) || n.shape() != (b.ncols(), b.ncols()) {
        return Err(RiccatiError::Shape(format!(
            "A {:?}, B {:?}, M {:?}, N {:?}",
            a.shape(),
            b.shape(),
            m.shape(),
            n.shape()
        )));
    }
    let n_inv = n
        .clone()
        .try_inverse()
        .ok_or_else(|| RiccatiError::Weights("N is singular".into()))?;
    let g = b * &n_inv * b.transpose();

    let mut iterations = 0;
    let mut p = sign_function_solution(a, &g, m, &mut iterations).unwrap_or_else(|| DMatrix::zeros(dim, dim));
    p = (&p + p.transpose()) * 0.5;

    let mut residual = riccati_residual(a, b, m, &n_inv, &p);
    let mut best = (residual, p.clone());
    for _ in 0..50 {
        if residual <= tol && is_stabilizing(a, b, &n_inv, &p) {
            break;
        }
        iterations += 1;
        let k = &n_inv * b.transpose() * &p;
        let ak = a - b * &k;
        let rhs = -(m + k.transpose() * n * &k);
        let Some(next) = lyapunov(&ak, &rhs) else { break };
        p = (&next + next.transpose()) * 0.5;
        residual = riccati_residual(a, b, m, &n_inv, &p);
        if residual < best.0 {
            best = (residual, p.clone());
        }
    }
    let (residual, p) = best;
    if !(residual <= tol.max(1e-8)) || !is_stabilizing(a, b, &n_inv, &p) {
        return Err(RiccatiError::NoConvergence { iterations, residual });
    }
    let k = &n_inv * b.transpose() * &p;
    Ok(RiccatiSolution {
        p,
        k,
        residual,
        iterations,
    })
}

fn is_stabilizing(a: &DMatrix<f64>, b: &DMatrix<f64>, n_inv: &DMatrix<f64>, p: &DMatrix<f64>) -> bool {
    let k = n_inv * b.transpose() * p;
    (a - b * k).complex_eigenvalues().iter().all(|e| e.re < 0.0)
}

/// Stable invariant subspace of `[[A, −G], [−M, −Aᵀ]]` via the matrix sign
/// function with determinant scaling.
fn sign_function_solution(
    a: &DMatrix<f64>,
    g: &DMatrix<f64>,
    m: &DMatrix<f64>,
    iterations: &mut usize,
) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut z = DMatrix::<f64>::zeros(2 * n, 2 * n);
    z.view_mut((0, 0), (n, n)).copy_from(a);
    z.view_mut((0, n), (n, n)).copy_from(&(-g));
    z.view_mut((n, 0), (n, n)).copy_from(&(-m));
    z.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    for _ in 0..100 {
        *iterations += 1;
        let lu = z.clone().lu();
        let det = lu.determinant();
        let inv = lu.try_inverse()?;
        let c = if det.is_finite() && det != 0.0 {
            det.abs().powf(1.0 / (2 * n) as f64)
        } else {
            1.0
        };
        let next = (&z / c + &inv * c) * 0.5;
        let change = (&next - &z).norm() / next.norm();
        z = next;
        if change < 1e-13 {
            break;
        }
    }
    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::<f64>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
    let mut rhs = DMatrix::<f64>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    lhs.svd(true, true).solve(&rhs, 1e-14).ok()
}

/// Solves `AᵀX + XA = C`.
pub fn lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(AᵀX) = (I ⊗ Aᵀ) vec X, vec(XA) = (Aᵀ ⊗ I) vec X
    let at = a.transpose();
    let kron = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = nalgebra::DVector::from_column_slice(c.as_slice());
    let x = kron.lu().solve(&rhs)?;
    Some(DMatrix::from_column_slice(n, n, x.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_integrator() {
        let a = DMatrix::from_element(1, 1, 0.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        let s = solve_riccati(&a, &b, &[1.0], &[1.0]).unwrap();
        assert!((s.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((s.k[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn double_integrator_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let s = solve_riccati(&a, &b, &[1.0, 1.0], &[1.0]).unwrap();
        let r3 = 3f64.sqrt();
        let want = DMatrix::from_row_slice(2, 2, &[r3, 1.0, 1.0, r3]);
        assert!((&s.p - want).norm() < 1e-10);
        assert!(s.residual <= 1e-8);
        assert!(s.closed_loop_eigenvalues(&a, &b).iter().all(|e| e.re < 0.0));
    }

    #[test]
    fn unstable_open_loop() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let s = solve_riccati(&a, &b, &[2.0, 1.0], &[0.5]).unwrap();
        assert!(s.residual <= 1e-8);
        assert!(s.closed_loop_eigenvalues(&a, &b).iter().all(|e| e.re < 0.0));
    }

    #[test]
    fn uncontrollable_unstable_mode_fails() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(matches!(
            solve_riccati(&a, &b, &[1.0, 1.0], &[1.0]),
            Err(RiccatiError::NoConvergence { .. })
        ));
    }

    #[test]
    fn lyapunov_solution() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let c = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let x = lyapunov(&a, &c).unwrap();
        assert!((a.transpose() * &x + &x * &a - c).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_weights() {
        let a = DMatrix::from_element(1, 1, 0.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        assert!(solve_riccati(&a, &b, &[0.0], &[1.0]).is_err());
    }
}
