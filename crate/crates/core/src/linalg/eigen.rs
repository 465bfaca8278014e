use nalgebra::DMatrix;

use super::{Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Maximum number of cyclic sweeps before Jacobi gives up.
pub const JACOBI_SWEEP_BUDGET: usize = 100;

/// Off-diagonal Frobenius norm target, relative to `‖S‖_F`.
const JACOBI_TOL: f64 = 1e-14;

/// Above this dimension `eigh`/`eigenvalues` switch from Jacobi to a
/// tridiagonal QR solver.
const JACOBI_MAX_DIM: usize = 160;

/// Relative threshold below which the smallest eigenvalue magnitude counts
/// as zero for the condition number.
const SINGULAR_REL: f64 = 1e-14;

/// Eigenvalues ascending, eigenvectors in the columns of `vectors` in the
/// same order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    /// `Q Λ Qᵀ`
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        Matrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| self.vectors.get(i, k) * self.values[k] * self.vectors.get(j, k)).sum()
        })
    }

    /// Applies `f(λ)` spectrally to `x`: `Q f(Λ) Qᵀ x`.
    pub fn apply_fn(&self, x: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        let coeffs = self.vectors.tr_mul_vec(x).expect("dimension checked by caller");
        let scaled: Vec<f64> = coeffs.iter().zip(&self.values).map(|(c, &l)| c * f(l)).collect();
        self.vectors.mul_vec(&scaled).expect("square")
    }
}

/// Cyclic Jacobi eigendecomposition.
pub fn jacobi_eigh(s: &SymMatrix) -> Result<EigenDecomposition> {
    jacobi_with_budget(s, JACOBI_SWEEP_BUDGET, true)
}

pub(crate) fn jacobi_with_budget(
    s: &SymMatrix,
    budget: usize,
    want_vectors: bool,
) -> Result<EigenDecomposition> {
    if s.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigensolver input"));
    }
    let n = s.dim();
    let mut a = s.to_matrix();
    let mut v = if want_vectors { Matrix::identity(n) } else { Matrix::zeros(0, 0) };
    let target = JACOBI_TOL * s.frobenius();

    let off_norm = |a: &Matrix| -> f64 {
        let mut acc = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                acc += 2.0 * a.get(p, q) * a.get(p, q);
            }
        }
        acc.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= target || off == 0.0 {
            break;
        }
        if sweeps == budget {
            return Err(Error::NoConvergence { sweeps, off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                // Negligible against both diagonal entries: drop it.
                if sweeps > 4
                    && (app.abs() + 100.0 * apq.abs() == app.abs())
                    && (aqq.abs() + 100.0 * apq.abs() == aqq.abs())
                {
                    a.set(p, q, 0.0);
                    a.set(q, p, 0.0);
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                let tau = sn / (1.0 + c);
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let g = a.get(r, p);
                    let h = a.get(r, q);
                    let np = g - sn * (h + g * tau);
                    let nq = h + sn * (g - h * tau);
                    a.set(r, p, np);
                    a.set(p, r, np);
                    a.set(r, q, nq);
                    a.set(q, r, nq);
                }
                if want_vectors {
                    for r in 0..n {
                        let g = v.get(r, p);
                        let h = v.get(r, q);
                        v.set(r, p, g - sn * (h + g * tau));
                        v.set(r, q, h + sn * (g - h * tau));
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = if want_vectors {
        Matrix::from_fn(n, n, |r, c| v.get(r, order[c]))
    } else {
        Matrix::zeros(0, 0)
    };
    Ok(EigenDecomposition { values, vectors })
}

fn to_nalgebra(s: &SymMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(s.dim(), s.dim(), s.as_slice())
}

/// Eigendecomposition, Jacobi for small matrices and implicit QR on the
/// tridiagonal form above `JACOBI_MAX_DIM`.
pub fn eigh(s: &SymMatrix) -> Result<EigenDecomposition> {
    if s.dim() <= JACOBI_MAX_DIM {
        return jacobi_eigh(s);
    }
    let eig = nalgebra::SymmetricEigen::new(to_nalgebra(s));
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalues"));
    }
    let n = s.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(s: &SymMatrix) -> Result<Vec<f64>> {
    if s.dim() <= JACOBI_MAX_DIM {
        return Ok(jacobi_with_budget(s, JACOBI_SWEEP_BUDGET, false)?.values);
    }
    let mut vals: Vec<f64> = to_nalgebra(s).symmetric_eigenvalues().iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalues"));
    }
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// `max|λ| / min|λ|`, or `+∞` when `min|λ| ≤ 1e-14 · max|λ|`.
pub fn condition_number_of_spectrum(eigs: &[f64]) -> f64 {
    let (lo, hi) = eigs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    if hi == 0.0 || lo <= SINGULAR_REL * hi {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn condition_number(s: &SymMatrix) -> Result<f64> {
    Ok(condition_number_of_spectrum(&eigenvalues(s)?))
}

/// Condition number restricted to eigenvalues above `rel_tol · max|λ|`,
/// i.e. on the numerical range. Used for models whose parametrisation has
/// exactly redundant directions.
pub fn range_condition_number(eigs: &[f64], rel_tol: f64) -> f64 {
    let hi = eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if hi == 0.0 {
        return f64::INFINITY;
    }
    let lo = eigs
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > rel_tol * hi)
        .fold(f64::INFINITY, f64::min);
    hi / lo
}
