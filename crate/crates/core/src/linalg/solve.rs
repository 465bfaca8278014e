use nalgebra::{DMatrix, DVector};

use super::{eigenvalues, norm2, SymMatrix};
use crate::error::{Error, Result};

const SINGULAR_REL: f64 = 1e-12;
const REFINEMENT_STEPS: usize = 3;

/// Minimiser of `‖(S + eps·I) x − g‖₂`.
///
/// Uses Cholesky when the shifted matrix is positive definite, LU otherwise,
/// and an SVD pseudo-inverse as last resort, followed by a few steps of
/// iterative refinement.
pub fn solve_ridge_least_squares(s: &SymMatrix, g: &[f64], eps: f64) -> Result<Vec<f64>> {
    let n = s.dim();
    if g.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: g.len() });
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::BadParam(format!("eps = {eps} must be finite and nonnegative")));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    if eps == 0.0 {
        let eigs = eigenvalues(s)?;
        let (lo, hi) = eigs
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
        if hi == 0.0 || lo <= SINGULAR_REL * hi {
            return Err(Error::Singular);
        }
    }

    let a = DMatrix::from_row_slice(n, n, s.as_slice()) + DMatrix::identity(n, n) * eps;
    let b = DVector::from_column_slice(g);

    let solver: Box<dyn Fn(&DVector<f64>) -> Option<DVector<f64>>> =
        if let Some(ch) = a.clone().cholesky() {
            Box::new(move |r| Some(ch.solve(r)))
        } else {
            let lu = a.clone().lu();
            if lu.is_invertible() {
                Box::new(move |r| lu.solve(r))
            } else {
                let svd = a.clone().svd(true, true);
                Box::new(move |r| svd.solve(r, f64::EPSILON * n as f64).ok())
            }
        };

    let mut x = solver(&b).ok_or(Error::Singular)?;
    for _ in 0..REFINEMENT_STEPS {
        let r = &b - &a * &x;
        if r.norm() <= 1e-15 * b.norm() {
            break;
        }
        match solver(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    let out: Vec<f64> = x.iter().copied().collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge solution"));
    }
    debug_assert!(norm2(&out).is_finite());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;

    #[test]
    fn identity_returns_rhs() {
        let g = vec![0.3, -1.0, 2.5];
        let x = solve_ridge_least_squares(&SymMatrix::identity(3), &g, 0.0).unwrap();
        for (a, b) in x.iter().zip(&g) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_case() {
        let s = SymMatrix::from_diag(&[2.0]).unwrap();
        let x = solve_ridge_least_squares(&s, &[4.0], 0.0).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_without_ridge() {
        let s = SymMatrix::from_diag(&[0.0, 1.0]).unwrap();
        assert_eq!(solve_ridge_least_squares(&s, &[1.0, 1.0], 0.0), Err(Error::Singular));
        let x = solve_ridge_least_squares(&s, &[1.0, 1.0], 1e-2).unwrap();
        assert!((x[0] - 100.0).abs() < 1e-10);
    }

    #[test]
    fn matches_spectral_inverse() {
        let n = 9;
        let s = SymMatrix::from_fn(n, |i, j| 1.0 / (1.0 + i as f64 + j as f64)).unwrap();
        let g: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let eps = 1e-4;
        let x = solve_ridge_least_squares(&s, &g, eps).unwrap();
        let e = eigh(&s).unwrap();
        let oracle = e.apply_fn(&g, |l| 1.0 / (l + eps));
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
        let r = s.shifted(eps).mul_vec(&x).unwrap();
        let res: f64 = r.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * norm2(&g));
    }
}
