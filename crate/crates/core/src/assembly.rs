//! Assembly of the linearised system `(A, B)`, the loss, and diagnostics.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{gram_columns, kron, Matrix, SymMatrix};
use crate::models::Model;
use crate::problems::{Jet, ProblemSpec, QuadGrid};

/// Largest parameter count for which a dense `A` is formed.
pub const DENSE_BUDGET: usize = 4096;
/// Largest parameter count for the finite-difference Hessian.
pub const HESSIAN_BUDGET: usize = 1500;
/// Points per parallel work unit; fixed so sums do not depend on thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Quadrature,
    ClosedFormPoisson,
    ClosedFormAdvection,
    ClosedFormHardBcAdvection,
}

/// `A_ij = ⟨𝒟φ_i, 𝒟φ_j⟩ + λ⟨φ_i, φ_j⟩_∂Ω` and
/// `B_i = ⟨f − 𝒟u₀, 𝒟φ_i⟩ + λ⟨g − u₀, φ_i⟩_∂Ω` at `θ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemPair {
    pub a: SymMatrix,
    pub b: Vec<f64>,
    pub lambda: f64,
    pub theta0: Vec<f64>,
    pub provenance: Provenance,
    pub preconditioned: bool,
}

impl SystemPair {
    pub fn dim(&self) -> usize {
        self.a.dim()
    }
}

/// Weighted tangent features stacked as rows: interior rows
/// `√w_q 𝒟φ(x_q)` then boundary rows `√(λ w_b) (c·φ)(b)`, with matching
/// weighted residuals `√w (target − model)` at `θ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub j: Matrix,
    pub r: Vec<f64>,
    pub n_interior: usize,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::BadParam(format!("lambda = {lambda} must be finite and nonnegative")));
    }
    Ok(())
}

fn check_theta(model: &dyn Model, theta: &[f64]) -> Result<()> {
    if theta.len() != model.n_params() {
        return Err(Error::DimensionMismatch { expected: model.n_params(), got: theta.len() });
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("parameters"));
    }
    Ok(())
}

fn check_dims(model: &dyn Model, problem: &ProblemSpec) -> Result<()> {
    if model.input_dim() != problem.input_dim() {
        return Err(Error::DimensionMismatch { expected: problem.input_dim(), got: model.input_dim() });
    }
    Ok(())
}

/// Value of a boundary constraint's left-hand side under the model.
fn constraint_value(model: &dyn Model, theta: &[f64], terms: &[(crate::problems::Point, Jet)]) -> f64 {
    terms.iter().map(|(p, c)| model.eval_jet(theta, *p).contract(c)).sum()
}

/// Rows of the design matrix; see [`DesignMatrix`].
pub fn design_matrix(
    model: &dyn Model,
    problem: &ProblemSpec,
    theta0: &[f64],
    lambda: f64,
    grid: &QuadGrid,
) -> Result<DesignMatrix> {
    check_lambda(lambda)?;
    check_theta(model, theta0)?;
    check_dims(model, problem)?;
    let n = model.n_params();
    let op = problem.operator_coeffs();
    let n_int = grid.len();
    let n_rows = n_int + grid.boundary.len();
    let rows: Vec<(Vec<f64>, f64)> = (0..n_rows)
        .into_par_iter()
        .map(|q| {
            let mut row = vec![0.0; n];
            if q < n_int {
                let p = grid.points[q];
                let s = grid.weights[q].sqrt();
                model.accumulate_functional_grad(theta0, p, &op, s, &mut row);
                let res = problem.forcing(p) - problem.operator(&model.eval_jet(theta0, p));
                (row, s * res)
            } else {
                let c = &grid.boundary[q - n_int];
                let s = (lambda * c.weight).sqrt();
                for (p, coef) in &c.terms {
                    model.accumulate_functional_grad(theta0, *p, coef, s, &mut row);
                }
                (row, s * (c.target - constraint_value(model, theta0, &c.terms)))
            }
        })
        .collect();
    let mut data = Vec::with_capacity(n_rows * n);
    let mut r = Vec::with_capacity(n_rows);
    for (row, res) in rows {
        data.extend(row);
        r.push(res);
    }
    if data.iter().chain(&r).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    Ok(DesignMatrix { j: Matrix::from_vec(n_rows, n, data)?, r, n_interior: n_int })
}

/// `(JᵀJ, Jᵀr)`.
pub fn normal_equations(d: &DesignMatrix) -> Result<(SymMatrix, Vec<f64>)> {
    Ok((gram_columns(&d.j)?, d.j.tr_mul_vec(&d.r)?))
}

/// Quadrature assembly of `(A, B)` at `θ₀`.
pub fn assemble_quadrature(
    model: &dyn Model,
    problem: &ProblemSpec,
    theta0: &[f64],
    lambda: f64,
    grid: &QuadGrid,
) -> Result<SystemPair> {
    let n = model.n_params();
    if n > DENSE_BUDGET {
        return Err(Error::BudgetExceeded { n, limit: DENSE_BUDGET });
    }
    let d = design_matrix(model, problem, theta0, lambda, grid)?;
    let (a, b) = normal_equations(&d)?;
    Ok(SystemPair {
        a,
        b,
        lambda,
        theta0: theta0.to_vec(),
        provenance: Provenance::Quadrature,
        preconditioned: false,
    })
}

/// Residual and boundary parts of a quadrature assembly, so that the system
/// can be re-formed cheaply for many `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSystem {
    pub a_res: SymMatrix,
    pub a_bc: SymMatrix,
    pub b_res: Vec<f64>,
    pub b_bc: Vec<f64>,
    pub theta0: Vec<f64>,
}

impl SplitSystem {
    pub fn at(&self, lambda: f64) -> Result<SystemPair> {
        check_lambda(lambda)?;
        Ok(SystemPair {
            a: self.a_res.add_scaled(&self.a_bc, lambda)?,
            b: self.b_res.iter().zip(&self.b_bc).map(|(r, b)| r + lambda * b).collect(),
            lambda,
            theta0: self.theta0.clone(),
            provenance: Provenance::Quadrature,
            preconditioned: false,
        })
    }

    pub fn matrix_at(&self, lambda: f64) -> Result<SymMatrix> {
        self.a_res.add_scaled(&self.a_bc, lambda)
    }
}

pub fn assemble_split(
    model: &dyn Model,
    problem: &ProblemSpec,
    theta0: &[f64],
    grid: &QuadGrid,
) -> Result<SplitSystem> {
    let n = model.n_params();
    if n > DENSE_BUDGET {
        return Err(Error::BudgetExceeded { n, limit: DENSE_BUDGET });
    }
    let d = design_matrix(model, problem, theta0, 1.0, grid)?;
    let (j_res, j_bc) = d.j.as_slice().split_at(d.n_interior * n);
    let res = DesignMatrix {
        j: Matrix::from_vec(d.n_interior, n, j_res.to_vec())?,
        r: d.r[..d.n_interior].to_vec(),
        n_interior: d.n_interior,
    };
    let bc = DesignMatrix {
        j: Matrix::from_vec(d.r.len() - d.n_interior, n, j_bc.to_vec())?,
        r: d.r[d.n_interior..].to_vec(),
        n_interior: 0,
    };
    let (a_res, b_res) = normal_equations(&res)?;
    let (a_bc, b_bc) = if bc.r.is_empty() {
        (SymMatrix::from_diag(&vec![0.0; n])?, vec![0.0; n])
    } else {
        normal_equations(&bc)?
    };
    Ok(SplitSystem { a_res, a_bc, b_res, b_bc, theta0: theta0.to_vec() })
}

/// Boundary vector `v` of the periodic Fourier basis at `x = ±π`, index
/// order `−K..=K`.
pub fn poisson_boundary_vector(k_max: usize) -> Vec<f64> {
    let k_max = k_max as i64;
    (-k_max..=k_max)
        .map(|k| match k {
            0 => 1.0 / (2.0 * PI).sqrt(),
            k if k < 0 => {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / PI.sqrt()
            }
            _ => 0.0,
        })
        .collect()
}

/// `A = D + λ v vᵀ` with `D_kk = k⁴` for the orthonormal Fourier basis, and
/// `B` for the Poisson problem with integer wave number `k`.
pub fn assemble_poisson_closed_form(k_max: usize, lambda: f64, k: u32, theta0: &[f64]) -> Result<SystemPair> {
    check_lambda(lambda)?;
    let n = 2 * k_max + 1;
    if theta0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: theta0.len() });
    }
    let d: Vec<f64> = (0..n).map(|i| (i as f64 - k_max as f64).powi(4)).collect();
    let a = SymMatrix::from_diag(&d)?.rank_one_update(&poisson_boundary_vector(k_max), lambda)?;
    // The exact solution sin(kx) is √π times the sin(kx) feature, or is
    // orthogonal to the whole span if k > K.
    let mut target = vec![0.0; n];
    if (k as usize) <= k_max && k > 0 {
        target[k_max + k as usize] = PI.sqrt();
    }
    let diff: Vec<f64> = target.iter().zip(theta0).map(|(t, t0)| t - t0).collect();
    let b = a.mul_vec(&diff)?;
    Ok(SystemPair {
        a,
        b,
        lambda,
        theta0: theta0.to_vec(),
        provenance: Provenance::ClosedFormPoisson,
        preconditioned: false,
    })
}

fn freq_diag(k: usize) -> Matrix {
    Matrix::from_diag(&(0..2 * k + 1).map(|i| i as f64 - k as f64).collect::<Vec<_>>())
}

/// `A' = Id⊗C² + 2βC⊗C + β²C²⊗Id + λ Id⊗11ᵀ` in the rescaled units,
/// index `(k₁+Kx)(2Kt+1) + (k₂+Kt)` with `k₁` spatial and `k₂` temporal.
///
/// `B` corresponds to the initial condition `sin x` at `θ₀ = 0`, in the same
/// units; it is shifted by `−Aθ₀`.
pub fn assemble_advection_closed_form(
    kx: usize,
    kt: usize,
    beta: f64,
    lambda: f64,
    theta0: &[f64],
) -> Result<SystemPair> {
    check_lambda(lambda)?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::BadParam(format!("beta = {beta} must be finite and nonnegative")));
    }
    let (nx, nt) = (2 * kx + 1, 2 * kt + 1);
    if theta0.len() != nx * nt {
        return Err(Error::DimensionMismatch { expected: nx * nt, got: theta0.len() });
    }
    let (cx, ct) = (freq_diag(kx), freq_diag(kt));
    let c2x = cx.matmul(&cx)?;
    let c2t = ct.matmul(&ct)?;
    let t1 = kron(&Matrix::identity(nx), &c2t)?;
    let t2 = kron(&cx, &ct)?;
    let t3 = kron(&c2x, &Matrix::identity(nt))?;
    let t4 = kron(&Matrix::identity(nx), &Matrix::from_fn(nt, nt, |_, _| 1.0))?;
    let m = Matrix::from_fn(nx * nt, nx * nt, |i, j| {
        t1.get(i, j) + 2.0 * beta * t2.get(i, j) + beta * beta * t3.get(i, j) + lambda * t4.get(i, j)
    });
    let a = SymMatrix::from_matrix(&m)?;
    let half = 0.5 * lambda * PI.sqrt();
    let b0: Vec<f64> = (0..nx * nt)
        .map(|i| match i / nt {
            q if q == kx + 1 => half,
            q if q + 1 == kx => -half,
            _ => 0.0,
        })
        .collect();
    let at0 = a.mul_vec(theta0)?;
    let b = b0.iter().zip(at0).map(|(x, y)| x - y).collect();
    Ok(SystemPair {
        a,
        b,
        lambda,
        theta0: theta0.to_vec(),
        provenance: Provenance::ClosedFormAdvection,
        preconditioned: false,
    })
}

/// Componentwise hard-initial-condition matrix on the full Hartley index
/// (rows of inert temporal-constant modes vanish):
/// `(k₂+βk₁)² δ_km − (βk₁)² δ_{k₁m₁}[δ_{k₂0} + δ_{m₂0}] + (βk₁)² δ_{k₁m₁}`.
pub fn hard_bc_advection_closed_form(kx: usize, kt: usize, beta: f64) -> Result<SymMatrix> {
    let nt = 2 * kt + 1;
    let n = (2 * kx + 1) * nt;
    let split = |i: usize| ((i / nt) as f64 - kx as f64, (i % nt) as f64 - kt as f64);
    SymMatrix::from_fn(n, |i, j| {
        let ((k1, k2), (m1, m2)) = (split(i), split(j));
        if k1 != m1 {
            return 0.0;
        }
        let bk = beta * k1;
        let mut v = bk * bk;
        if k2 == 0.0 {
            v -= bk * bk;
        }
        if m2 == 0.0 {
            v -= bk * bk;
        }
        if i == j {
            v += (k2 + bk) * (k2 + bk);
        }
        v
    })
}

/// `ε_k = −∇L(θ_k) + A(θ_k − θ₀) − B`.
pub fn epsilon_k(sys: &SystemPair, theta_k: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
    let n = sys.dim();
    for len in [theta_k.len(), grad.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let diff: Vec<f64> = theta_k.iter().zip(&sys.theta0).map(|(a, b)| a - b).collect();
    let ad = sys.a.mul_vec(&diff)?;
    Ok((0..n).map(|i| -grad[i] + ad[i] - sys.b[i]).collect())
}

/// `L = ½ Σ w_q (𝒟u − f)² + (λ/2) Σ w_b (c·u − g)²` and its gradient.
pub fn loss_and_grad(
    model: &dyn Model,
    problem: &ProblemSpec,
    theta: &[f64],
    lambda: f64,
    grid: &QuadGrid,
) -> Result<(f64, Vec<f64>)> {
    check_lambda(lambda)?;
    check_theta(model, theta)?;
    check_dims(model, problem)?;
    let n = model.n_params();
    let op = problem.operator_coeffs();
    let n_int = grid.len();
    let n_all = n_int + grid.boundary.len();
    let partials: Vec<(f64, Vec<f64>)> = (0..n_all.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut loss = 0.0;
            let mut g = vec![0.0; n];
            for q in c * CHUNK..((c + 1) * CHUNK).min(n_all) {
                if q < n_int {
                    let p = grid.points[q];
                    let w = grid.weights[q];
                    let r = problem.operator(&model.eval_jet(theta, p)) - problem.forcing(p);
                    loss += 0.5 * w * r * r;
                    model.accumulate_functional_grad(theta, p, &op, w * r, &mut g);
                } else {
                    let bc = &grid.boundary[q - n_int];
                    let w = lambda * bc.weight;
                    if w == 0.0 {
                        continue;
                    }
                    let r = constraint_value(model, theta, &bc.terms) - bc.target;
                    loss += 0.5 * w * r * r;
                    for (p, coef) in &bc.terms {
                        model.accumulate_functional_grad(theta, *p, coef, w * r, &mut g);
                    }
                }
            }
            (loss, g)
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for (l, g) in partials {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    if !loss.is_finite() || grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss"));
    }
    Ok((loss, grad))
}

/// Mean squared error against the exact solution over the interior points.
pub fn mse(model: &dyn Model, problem: &ProblemSpec, theta: &[f64], grid: &QuadGrid) -> f64 {
    // Collected before summing so the result does not depend on scheduling.
    let sq: Vec<f64> = grid
        .points
        .par_iter()
        .map(|&p| (model.eval_jet(theta, p).u - problem.exact(p)).powi(2))
        .collect();
    sq.iter().sum::<f64>() / grid.len() as f64
}

/// Fourth-order central differences of the analytic gradient, before
/// symmetrisation.
pub fn hessian_fd_raw(
    model: &dyn Model,
    problem: &ProblemSpec,
    theta: &[f64],
    lambda: f64,
    grid: &QuadGrid,
) -> Result<Matrix> {
    let n = model.n_params();
    if n > HESSIAN_BUDGET {
        return Err(Error::BudgetExceeded { n, limit: HESSIAN_BUDGET });
    }
    let mut h = Matrix::zeros(n, n);
    let mut th = theta.to_vec();
    for i in 0..n {
        let step = 1e-3 * theta[i].abs().max(1.0);
        let mut grad_at = |d: f64| -> Result<Vec<f64>> {
            th[i] = theta[i] + d;
            let g = loss_and_grad(model, problem, &th, lambda, grid).map(|r| r.1);
            th[i] = theta[i];
            g
        };
        let (gp2, gp1, gm1, gm2) = (grad_at(2.0 * step)?, grad_at(step)?, grad_at(-step)?, grad_at(-2.0 * step)?);
        for j in 0..n {
            h.set(j, i, (gm2[j] - gp2[j] + 8.0 * (gp1[j] - gm1[j])) / (12.0 * step));
        }
    }
    Ok(h)
}

/// Finite-difference Hessian of the loss, symmetrised.
pub fn hessian_fd(
    model: &dyn Model,
    problem: &ProblemSpec,
    theta: &[f64],
    lambda: f64,
    grid: &QuadGrid,
) -> Result<SymMatrix> {
    SymMatrix::from_matrix(&hessian_fd_raw(model, problem, theta, lambda, grid)?)
}

const MAGIC: &[u8; 8] = b"PINNCOND";

/// Little-endian dump: 16-byte header (`PINNCOND`, `u32 n`, `u32 0`), then
/// `A` row-major and `B`.
pub fn write_system(w: &mut impl Write, sys: &SystemPair) -> std::io::Result<()> {
    let n = sys.dim();
    w.write_all(MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for v in sys.a.as_slice().iter().chain(&sys.b) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads back what [`write_system`] wrote, as `(A, B)`.
pub fn read_system(r: &mut impl Read) -> Result<(SymMatrix, Vec<f64>)> {
    let io = |e: std::io::Error| Error::BadInput(e.to_string());
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(io)?;
    if &header[..8] != MAGIC {
        return Err(Error::BadInput("missing PINNCOND header".into()));
    }
    let n = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let mut buf = vec![0u8; 8 * (n * n + n)];
    r.read_exact(&mut buf).map_err(io)?;
    let vals: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let a = SymMatrix::from_matrix(&Matrix::from_vec(n, n, vals[..n * n].to_vec())?)?;
    Ok((a, vals[n * n..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues, secular_rank_one_eigenvalues, RankOneUpdate};
    use crate::models::{fourier1d, fourier2d, mlp, Basis2D, Fourier1DConfig, Fourier2DConfig, MlpConfig};
    use crate::problems::{make_grid, make_problem, ProblemKind};

    fn poisson(k: f64) -> ProblemSpec {
        make_problem(ProblemKind::Poisson, k).unwrap()
    }

    fn max_diff(a: &SymMatrix, b: &SymMatrix) -> f64 {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn fourier_k1_without_boundary() {
        let m = fourier1d(Fourier1DConfig::new(1));
        let g = make_grid(&poisson(1.0), 256, 1).unwrap();
        let s = assemble_quadrature(&m, &poisson(1.0), &[0.0; 3], 0.0, &g).unwrap();
        let want = SymMatrix::from_diag(&[1.0, 0.0, 1.0]).unwrap();
        assert!(max_diff(&s.a, &want) < 1e-6);
    }

    #[test]
    fn single_mode_rhs() {
        let k_max = 4;
        let m = fourier1d(Fourier1DConfig::new(k_max));
        for l in 1..=k_max {
            let p = poisson(l as f64);
            let g = make_grid(&p, 512, 1).unwrap();
            let s = assemble_quadrature(&m, &p, &vec![0.0; 9], 0.0, &g).unwrap();
            for (i, b) in s.b.iter().enumerate() {
                let want = if i == k_max + l { (l as f64).powi(4) * PI.sqrt() } else { 0.0 };
                assert!((b - want).abs() < 1e-9, "l={l} i={i}: {b}");
            }
        }
    }

    #[test]
    fn closed_form_poisson_matches_quadrature() {
        for (k_max, lambda, n_x) in [(8usize, 3.0, 2048usize), (16, 0.7, 4096)] {
            let m = fourier1d(Fourier1DConfig::new(k_max));
            let p = poisson(3.0);
            let g = make_grid(&p, n_x, 1).unwrap();
            let th0: Vec<f64> = (0..2 * k_max + 1).map(|i| (i as f64).cos()).collect();
            let q = assemble_quadrature(&m, &p, &th0, lambda, &g).unwrap();
            let c = assemble_poisson_closed_form(k_max, lambda, 3, &th0).unwrap();
            assert!(max_diff(&q.a, &c.a) <= 1e-6);
            for (x, y) in q.b.iter().zip(&c.b) {
                assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn closed_form_poisson_vector_and_secular_spectrum() {
        let v = poisson_boundary_vector(2);
        let r = 1.0 / PI.sqrt();
        let want = [r, -r, 1.0 / (2.0 * PI).sqrt(), 0.0, 0.0];
        for (a, b) in v.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let s = assemble_poisson_closed_form(2, 0.0, 1, &[0.0; 5]).unwrap();
        assert_eq!(s.a.diag(), vec![16.0, 1.0, 0.0, 1.0, 16.0]);

        let lambda = 5.0;
        let s = assemble_poisson_closed_form(6, lambda, 1, &[0.0; 13]).unwrap();
        let mut order: Vec<usize> = (0..13).collect();
        let d0: Vec<f64> = (0..13).map(|i| (i as f64 - 6.0).powi(4)).collect();
        order.sort_by(|&a, &b| d0[a].total_cmp(&d0[b]));
        let v = poisson_boundary_vector(6);
        let r1 = RankOneUpdate::new(order.iter().map(|&i| d0[i]).collect(), order.iter().map(|&i| v[i]).collect(), lambda)
            .unwrap();
        let w = secular_rank_one_eigenvalues(&r1).unwrap();
        for (a, b) in w.iter().zip(eigenvalues(&s.a).unwrap()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn advection_closed_form_entries() {
        let s = assemble_advection_closed_form(2, 2, 0.0, 0.0, &[0.0; 25]).unwrap();
        let d: Vec<f64> = (0..25).map(|i| ((i % 5) as f64 - 2.0).powi(2)).collect();
        assert_eq!(s.a.diag(), d);
        // Hand-expanded oracle.
        let beta = 1.7;
        let lam = 0.4;
        let s = assemble_advection_closed_form(2, 2, beta, lam, &[0.0; 25]).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                let (k1, k2) = ((i / 5) as f64 - 2.0, (i % 5) as f64 - 2.0);
                let (m1, _) = ((j / 5) as f64 - 2.0, (j % 5) as f64 - 2.0);
                let mut want = 0.0;
                if i == j {
                    want += (k2 + beta * k1).powi(2);
                }
                if k1 == m1 {
                    want += lam;
                }
                assert!((s.a.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    fn hartley(kx: usize, kt: usize) -> crate::models::Fourier2D {
        fourier2d(Fourier2DConfig { basis: Basis2D::Hartley, ..Fourier2DConfig::new(kx, kt) })
    }

    #[test]
    fn advection_closed_form_matches_quadrature_up_to_scale() {
        let (kx, kt) = (2, 2);
        let beta = 3.0;
        let lambda = 5.0;
        let m = hartley(kx, kt);
        let p = make_problem(ProblemKind::Advection, beta).unwrap();
        let g = make_grid(&p, 64, 64).unwrap();
        let n = m.n_params();
        let q = assemble_quadrature(&m, &p, &vec![0.0; n], lambda, &g).unwrap();
        let c = assemble_advection_closed_form(kx, kt, beta / (2.0 * PI), lambda / (4.0 * PI * PI), &vec![0.0; n])
            .unwrap();
        // Least-squares fit of a single scale.
        let num: f64 = q.a.as_slice().iter().zip(c.a.as_slice()).map(|(x, y)| x * y).sum();
        let den: f64 = c.a.as_slice().iter().map(|y| y * y).sum();
        let scale = num / den;
        assert!((scale - 8.0 * PI * PI).abs() < 1e-8);
        assert!(max_diff(&q.a, &c.a.scaled(scale)) < 1e-6 * q.a.max_abs());
        for (x, y) in q.b.iter().zip(&c.b) {
            assert!((x - scale * y).abs() < 1e-8);
        }
    }

    #[test]
    fn hard_bc_advection_matches_formula() {
        let (kx, kt) = (2, 2);
        let beta = 2.5;
        let inner = hartley(kx, kt);
        let m = crate::models::hard_bc_advection(Box::new(inner), 1.0, false).unwrap();
        let p = make_problem(ProblemKind::Advection, beta).unwrap();
        let g = make_grid(&p, 64, 64).unwrap();
        let q = assemble_quadrature(&m, &p, &vec![0.0; 25], 0.0, &g).unwrap();
        let c = hard_bc_advection_closed_form(kx, kt, beta / (2.0 * PI)).unwrap().scaled(8.0 * PI * PI);
        assert!(max_diff(&q.a, &c) < 1e-6 * q.a.max_abs());
    }

    #[test]
    fn linear_gradient_is_affine_and_hessian_is_a() {
        let m = fourier1d(Fourier1DConfig::new(4));
        let p = poisson(2.0);
        let g = make_grid(&p, 128, 1).unwrap();
        let th0: Vec<f64> = (0..9).map(|i| 0.3 * i as f64 - 1.0).collect();
        let s = assemble_quadrature(&m, &p, &th0, 2.0, &g).unwrap();
        let th: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let (_, grad) = loss_and_grad(&m, &p, &th, 2.0, &g).unwrap();
        let eps = epsilon_k(&s, &th, &grad).unwrap();
        let scale = crate::linalg::norm2(&grad) + crate::linalg::norm2(&s.b);
        assert!(crate::linalg::norm2(&eps) <= 1e-9 * scale);
        let (_, g0) = loss_and_grad(&m, &p, &th0, 2.0, &g).unwrap();
        for (a, b) in g0.iter().zip(&s.b) {
            assert!((a + b).abs() < 1e-9 * scale);
        }
        let h = hessian_fd(&m, &p, &th, 2.0, &g).unwrap();
        assert!(max_diff(&h, &s.a) <= 1e-6 * s.a.max_abs());
    }

    #[test]
    fn exact_span_solution_has_zero_loss() {
        let m = fourier1d(Fourier1DConfig::new(3));
        let p = poisson(2.0);
        let g = make_grid(&p, 64, 1).unwrap();
        let mut th = vec![0.0; 7];
        th[5] = PI.sqrt();
        let (l, _) = loss_and_grad(&m, &p, &th, 10.0, &g).unwrap();
        assert!(l <= 1e-12);
    }

    #[test]
    fn mlp_gradient_and_hessian_symmetry() {
        let m = mlp(MlpConfig::new(1, vec![6], 4)).unwrap();
        let p = poisson(1.0);
        let g = make_grid(&p, 32, 1).unwrap();
        let th = m.init();
        let (_, grad) = loss_and_grad(&m, &p, &th, 1.0, &g).unwrap();
        let mut t = th.clone();
        for i in 0..th.len() {
            let h = 1e-3;
            let mut at = |d: f64| {
                t[i] = th[i] + d;
                let l = loss_and_grad(&m, &p, &t, 1.0, &g).unwrap().0;
                t[i] = th[i];
                l
            };
            let fd = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1.0), "{i}: {fd} vs {}", grad[i]);
        }
        let h = hessian_fd_raw(&m, &p, &th, 1.0, &g).unwrap();
        let scale = h.max_abs();
        for i in 0..th.len() {
            for j in 0..th.len() {
                assert!((h.get(i, j) - h.get(j, i)).abs() <= 1e-8 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn lambda_affinity_and_psd() {
        let m = mlp(MlpConfig::new(1, vec![5], 1)).unwrap();
        let p = poisson(1.0);
        let g = make_grid(&p, 40, 1).unwrap();
        let th = m.init();
        let a0 = assemble_quadrature(&m, &p, &th, 0.0, &g).unwrap().a;
        let a1 = assemble_quadrature(&m, &p, &th, 1.0, &g).unwrap().a;
        let a3 = assemble_quadrature(&m, &p, &th, 3.7, &g).unwrap().a;
        let lin = a0.add_scaled(&a1.add_scaled(&a0, -1.0).unwrap(), 3.7).unwrap();
        assert!(max_diff(&a3, &lin) <= 1e-10 * a3.max_abs().max(1.0));
        let e = eigenvalues(&a3).unwrap();
        assert!(e[0] >= -1e-10 * e[e.len() - 1]);
        let split = assemble_split(&m, &p, &th, &g).unwrap();
        assert!(max_diff(&split.matrix_at(3.7).unwrap(), &a3) <= 1e-10 * a3.max_abs());
    }

    #[test]
    fn hessian_budget() {
        let m = mlp(MlpConfig::new(1, vec![64, 64], 0)).unwrap();
        let p = poisson(1.0);
        let g = make_grid(&p, 4, 1).unwrap();
        let r = hessian_fd(&m, &p, &m.init(), 1.0, &g);
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn binary_dump_roundtrip() {
        let s = assemble_poisson_closed_form(2, 1.5, 1, &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let mut buf = Vec::new();
        write_system(&mut buf, &s).unwrap();
        assert_eq!(&buf[..8], b"PINNCOND");
        assert_eq!(buf.len(), 16 + 8 * 30);
        let (a, b) = read_system(&mut buf.as_slice()).unwrap();
        assert_eq!(a, s.a);
        assert_eq!(b, s.b);
    }
}
