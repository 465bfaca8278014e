//! Parameter-transform and gradient preconditioners.

use crate::assembly::SystemPair;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, solve_ridge_least_squares, Matrix, SymMatrix};

/// Relative resonance guard for the diagonal rules.
const RESONANCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum PrecondKind {
    Identity(usize),
    Diagonal(Vec<f64>),
    DenseSpd(Matrix),
}

/// A positive-definite parameter transform `θ = P θ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    pub kind: PrecondKind,
    /// Scale of the constant mode, when the preconditioner has one.
    pub gamma: Option<f64>,
}

/// How zero-symbol pairs of the advection rule are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResonancePolicy {
    /// Only the `(0, 0)` pair may vanish; any other is an error.
    #[default]
    Reject,
    /// Every vanishing pair gets factor 1, as `(0, 0)` does.
    UnitFactor,
}

impl Preconditioner {
    pub fn identity(n: usize) -> Self {
        Preconditioner { kind: PrecondKind::Identity(n), gamma: None }
    }

    pub fn diagonal(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::EmptyInput);
        }
        if d.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::BadParam("diagonal preconditioner entries must be positive".into()));
        }
        Ok(Preconditioner { kind: PrecondKind::Diagonal(d), gamma: None })
    }

    pub fn dense_spd(p: Matrix) -> Result<Self> {
        let s = SymMatrix::from_matrix(&p)?;
        if s.as_slice() != p.as_slice() {
            return Err(Error::BadParam("dense preconditioner must be symmetric".into()));
        }
        let e = eigenvalues(&s)?;
        let (lo, hi) = (e[0], e[e.len() - 1]);
        if !(hi > 0.0 && lo > 1e-12 * hi) {
            return Err(Error::BadParam("dense preconditioner must be positive definite".into()));
        }
        Ok(Preconditioner { kind: PrecondKind::DenseSpd(p), gamma: None })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            PrecondKind::Identity(n) => *n,
            PrecondKind::Diagonal(d) => d.len(),
            PrecondKind::DenseSpd(m) => m.rows(),
        }
    }

    pub fn diag(&self) -> Option<&[f64]> {
        match &self.kind {
            PrecondKind::Diagonal(d) => Some(d),
            _ => None,
        }
    }

    pub fn to_matrix(&self) -> Matrix {
        match &self.kind {
            PrecondKind::Identity(n) => Matrix::identity(*n),
            PrecondKind::Diagonal(d) => Matrix::from_diag(d),
            PrecondKind::DenseSpd(m) => m.clone(),
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: len });
        }
        Ok(())
    }

    /// `P x`
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x.len())?;
        match &self.kind {
            PrecondKind::Identity(_) => Ok(x.to_vec()),
            PrecondKind::Diagonal(d) => Ok(d.iter().zip(x).map(|(p, v)| p * v).collect()),
            PrecondKind::DenseSpd(m) => m.mul_vec(x),
        }
    }

    /// `Pᵀ x`
    pub fn apply_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x.len())?;
        match &self.kind {
            PrecondKind::DenseSpd(m) => m.tr_mul_vec(x),
            _ => self.apply(x),
        }
    }

    /// `P⁻¹ x`
    pub fn solve(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x.len())?;
        match &self.kind {
            PrecondKind::Identity(_) => Ok(x.to_vec()),
            PrecondKind::Diagonal(d) => Ok(d.iter().zip(x).map(|(p, v)| v / p).collect()),
            PrecondKind::DenseSpd(m) => solve_ridge_least_squares(&SymMatrix::from_matrix(m)?, x, 0.0),
        }
    }

    /// `P Pᵀ g`
    pub fn precondition_gradient(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.apply(&self.apply_t(g)?)
    }
}

/// `P_kk = 1/k²` for `k ≠ 0`, `P_00 = γ`, index order `−K..=K`.
pub fn poisson_diag(k_max: usize, gamma: f64) -> Result<Preconditioner> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::BadParam(format!("gamma = {gamma} must be positive")));
    }
    let k_max = k_max as i64;
    let d = (-k_max..=k_max).map(|k| if k == 0 { gamma } else { 1.0 / (k * k) as f64 }).collect();
    let mut p = Preconditioner::diagonal(d)?;
    p.gamma = Some(gamma);
    Ok(p)
}

/// `P_kk = 1/|k² − ω²|`, index order `−K..=K`.
pub fn helmholtz_diag(k_max: usize, omega: f64) -> Result<Preconditioner> {
    let k_max = k_max as i64;
    let mut d = Vec::with_capacity((2 * k_max + 1) as usize);
    for k in -k_max..=k_max {
        let gap = ((k * k) as f64 - omega * omega).abs();
        if !(gap >= RESONANCE_TOL) {
            return Err(Error::Resonant { k, gap });
        }
        d.push(1.0 / gap);
    }
    Preconditioner::diagonal(d)
}

/// `1/|ω_t m + β k|` for each `(k, m)` in `modes` (one entry per
/// parameter), with factor 1 on the `(0, 0)` pair.
pub fn advection_diag(
    modes: &[(i64, i64)],
    beta: f64,
    omega_t: f64,
    policy: ResonancePolicy,
) -> Result<Preconditioner> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::BadParam(format!("beta = {beta} must be positive")));
    }
    let mut d = Vec::with_capacity(modes.len());
    for &(k, m) in modes {
        let symbol = (omega_t * m as f64 + beta * k as f64).abs();
        if (k, m) == (0, 0) {
            d.push(1.0);
        } else if symbol <= RESONANCE_TOL {
            match policy {
                ResonancePolicy::Reject => return Err(Error::NearResonant { k, m, symbol }),
                ResonancePolicy::UnitFactor => d.push(1.0),
            }
        } else {
            d.push(1.0 / symbol);
        }
    }
    Preconditioner::diagonal(d)
}

/// `A ← PᵀAP`, `B ← PᵀB`, `θ₀ ← P⁻¹θ₀`.
pub fn transform(p: &Preconditioner, sys: &SystemPair) -> Result<SystemPair> {
    p.check(sys.dim())?;
    let a = match &p.kind {
        PrecondKind::Identity(_) => sys.a.clone(),
        PrecondKind::Diagonal(d) => sys.a.congruence_diag(d)?,
        PrecondKind::DenseSpd(m) => sys.a.congruence(m)?,
    };
    Ok(SystemPair {
        a,
        b: p.apply_t(&sys.b)?,
        lambda: sys.lambda,
        theta0: p.solve(&sys.theta0)?,
        provenance: sys.provenance,
        preconditioned: true,
    })
}

/// Gradient preconditioning rules.
#[derive(Debug, Clone, PartialEq)]
pub enum GradPreconditioner {
    /// `g ↦ P Pᵀ g`
    Transform(Preconditioner),
    /// `g ↦ (A + εI)⁻¹ g`
    Inverse { a: SymMatrix, eps: f64 },
}

/// Default regularisation of the inverse rule.
pub const DEFAULT_RIDGE_EPS: f64 = 1e-3;

pub fn grad_precondition(rule: &GradPreconditioner, g: &[f64]) -> Result<Vec<f64>> {
    match rule {
        GradPreconditioner::Transform(p) => p.precondition_gradient(g),
        GradPreconditioner::Inverse { a, eps } => solve_ridge_least_squares(a, g, *eps),
    }
}
