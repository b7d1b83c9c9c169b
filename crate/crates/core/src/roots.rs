//! Scalar root finding: closed-form real roots of polynomials up to degree
//! three and a bracketed solver for monotone residuals.

use std::f64::consts::PI;

/// A bracket whose endpoint residuals do not change sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoSignChange {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Real roots of `c[0]·x³ + c[1]·x² + c[2]·x + c[3]`, sorted ascending.
///
/// Leading coefficients that vanish relative to the others drop the degree.
/// Each root is polished with a few Newton steps on the original polynomial.
/// Repeated roots are reported once.
pub fn real_cubic_roots(c: [f64; 4]) -> Vec<f64> {
    let scale = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let [a, b, cc, d] = c.map(|v| v / scale);
    let mut roots = if a.abs() < 1e-14 {
        real_quadratic_roots(b, cc, d)
    } else {
        depressed_cubic_roots(b / a, cc / a, d / a)
    };
    for r in roots.iter_mut() {
        *r = newton_polish([a, b, cc, d], *r);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * (1.0 + y.abs()));
    roots
}

fn real_quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a.abs() < 1e-14 {
        if b.abs() < 1e-14 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    // Numerically stable pairing of the two roots.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Roots of the monic cubic x³ + b x² + c x + d.
fn depressed_cubic_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    // x = t - b/3 gives t³ + p t + q = 0
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);

    if p.abs() < 1e-300 && q.abs() < 1e-300 {
        return vec![-shift];
    }
    if disc > 0.0 {
        // one real root (Cardano)
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        vec![u + v - shift]
    } else {
        // three real roots (trigonometric form)
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (phi - 2.0 * PI * k as f64 / 3.0).cos() - shift)
            .collect()
    }
}

fn newton_polish(c: [f64; 4], mut x: f64) -> f64 {
    for _ in 0..4 {
        let f = ((c[0] * x + c[1]) * x + c[2]) * x + c[3];
        let df = (3.0 * c[0] * x + 2.0 * c[1]) * x + c[2];
        if df == 0.0 || !f.is_finite() {
            break;
        }
        let step = f / df;
        if !step.is_finite() {
            break;
        }
        x -= step;
        if step.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// Finds a root of `f` on `[lo, hi]` by the Illinois variant of regula falsi.
///
/// Iterates until the bracket is narrower than `tol` or the residual is
/// exactly zero.
pub fn bracketed_root<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64, NoSignChange>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(NoSignChange { lo, hi, f_lo, f_hi });
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == f_hi.signum() {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= tol {
            break;
        }
    }
    Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(c: [f64; 4], x: f64) -> f64 {
        ((c[0] * x + c[1]) * x + c[2]) * x + c[3]
    }

    #[test]
    fn three_known_roots() {
        // (x-1)(x-2)(x+3) = x³ - 7x + 6
        let r = real_cubic_roots([1.0, 0.0, -7.0, 6.0]);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn one_real_root() {
        // x³ + x + 1: single real root near -0.6823
        let c = [1.0, 0.0, 1.0, 1.0];
        let r = real_cubic_roots(c);
        assert_eq!(r.len(), 1);
        assert!(eval(c, r[0]).abs() < 1e-14);
    }

    #[test]
    fn degenerate_leading_coefficient() {
        let r = real_cubic_roots([0.0, 1.0, -3.0, 2.0]);
        assert_eq!(r.len(), 2);
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
        assert_eq!(real_cubic_roots([0.0, 0.0, 2.0, -4.0]), vec![2.0]);
        assert!(real_cubic_roots([0.0; 4]).is_empty());
    }

    #[test]
    fn double_root_reported_once() {
        // (x-1)²(x+2) = x³ - 3x + 2
        let r = real_cubic_roots([1.0, 0.0, -3.0, 2.0]);
        assert!(r.iter().any(|x| (x + 2.0).abs() < 1e-9));
        assert!(r.iter().any(|x| (x - 1.0).abs() < 1e-6));
    }

    #[test]
    fn bracket_without_sign_change() {
        let err = bracketed_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).unwrap_err();
        assert_eq!(err.f_lo, 2.0);
        assert_eq!(err.f_hi, 2.0);
    }

    #[test]
    fn bracketed_matches_sqrt() {
        let r = bracketed_root(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }
}
