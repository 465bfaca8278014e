//! Gradient descent on the physics-informed loss and its linearisation.

use crate::assembly::{assemble_quadrature, design_matrix, epsilon_k, loss_and_grad, mse, DesignMatrix, SystemPair};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, eigh, norm2, Matrix, SymMatrix};
use crate::models::Model;
use crate::precond::{grad_precondition, GradPreconditioner};
use crate::problems::{Jet, ProblemSpec, QuadGrid};
use rayon::prelude::*;

/// Loss above which a run counts as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e12;

/// Per-step record of a run. Index `k` holds the state after `k` steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// Parameter snapshots every `stride` steps (always including step 0).
    pub thetas: Vec<Vec<f64>>,
    pub stride: usize,
    pub losses: Vec<f64>,
    pub mses: Vec<f64>,
    pub eps_norms: Vec<f64>,
    /// `‖θ_k − θ*‖`, when a reference solution is known.
    pub dists: Vec<f64>,
    pub steps: usize,
    pub eta: f64,
}

impl Trajectory {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().unwrap_or(&f64::NAN)
    }

    pub fn final_mse(&self) -> f64 {
        *self.mses.last().unwrap_or(&f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// `η = c / λ_max` of the (preconditioned) system matrix.
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GDSettings {
    pub steps: usize,
    pub step_size: StepSize,
    pub stride: usize,
}

impl GDSettings {
    pub fn new(steps: usize, c: f64) -> Self {
        GDSettings { steps, step_size: StepSize::Fraction(c), stride: 1 }
    }

    pub fn with_eta(steps: usize, eta: f64) -> Self {
        GDSettings { steps, step_size: StepSize::Fixed(eta), stride: 1 }
    }

    fn validate(&self) -> Result<()> {
        match self.step_size {
            StepSize::Fraction(c) if !(c > 0.0 && c < 1.0 + 1e-15) => {
                Err(Error::BadParam(format!("stability fraction c = {c} must lie in (0, 1]")))
            }
            StepSize::Fixed(eta) if !(eta.is_finite() && eta > 0.0) => {
                Err(Error::BadParam(format!("step size {eta} must be positive")))
            }
            _ if self.stride == 0 => Err(Error::BadParam("snapshot stride must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// `η = c / λ_max(A)`.
pub fn max_stable_lr(a: &SymMatrix, c: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::BadParam(format!("c = {c} must lie in (0, 1]")));
    }
    let e = eigenvalues(a)?;
    let top = e[e.len() - 1];
    if top <= 0.0 {
        return Err(Error::NonPositiveSpectrum(top));
    }
    Ok(c / top)
}

/// `θ* = θ₀ + A⁻¹B`, by eigendecomposition.
pub fn theta_star(sys: &SystemPair) -> Result<Vec<f64>> {
    let e = eigh(&sys.a)?;
    let hi = e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lo = e.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if hi == 0.0 || lo <= 1e-14 * hi {
        return Err(Error::Singular);
    }
    let x = e.apply_fn(&sys.b, |l| 1.0 / l);
    Ok(sys.theta0.iter().zip(x).map(|(a, b)| a + b).collect())
}

fn resolve_eta(settings: &GDSettings, a: &SymMatrix) -> Result<f64> {
    match settings.step_size {
        StepSize::Fixed(eta) => Ok(eta),
        StepSize::Fraction(c) => max_stable_lr(a, c.min(1.0)),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Quadratic model `½ dᵀA d − Bᵀd` with `d = θ − θ₀`.
fn quadratic_loss(sys: &SystemPair, theta: &[f64]) -> Result<f64> {
    let d: Vec<f64> = theta.iter().zip(&sys.theta0).map(|(a, b)| a - b).collect();
    let ad = sys.a.mul_vec(&d)?;
    Ok(d.iter().zip(&ad).zip(&sys.b).map(|((di, ai), bi)| 0.5 * di * ai - bi * di).sum())
}

/// `θ̃_{k+1} = (I − ηA)θ̃_k + η(Aθ₀ + B)`, starting at `θ₀`. Records the
/// quadratic model loss and, for nonsingular `A`, the distance to `θ*`.
pub fn run_simplified_gd(sys: &SystemPair, settings: &GDSettings) -> Result<Trajectory> {
    settings.validate()?;
    let eta = resolve_eta(settings, &sys.a)?;
    // Singular systems have no unique minimiser; distances are then skipped.
    let star = theta_star(sys).ok();
    let n = sys.dim();
    let a0 = sys.a.mul_vec(&sys.theta0)?;
    let shift: Vec<f64> = (0..n).map(|i| eta * (a0[i] + sys.b[i])).collect();
    let mut traj = Trajectory { stride: settings.stride, eta, ..Default::default() };
    let mut theta = sys.theta0.clone();
    for k in 0..=settings.steps {
        if k % settings.stride == 0 {
            traj.thetas.push(theta.clone());
        }
        traj.losses.push(quadratic_loss(sys, &theta)?);
        if let Some(s) = &star {
            traj.dists.push(dist(&theta, s));
        }
        if k == settings.steps {
            break;
        }
        let at = sys.a.mul_vec(&theta)?;
        for i in 0..n {
            theta[i] = theta[i] - eta * at[i] + shift[i];
        }
    }
    traj.steps = settings.steps;
    Ok(traj)
}

/// Optional inputs of [`run_full_gd`].
#[derive(Debug, Clone, Copy, Default)]
pub struct FullGdOptions<'a> {
    pub precond: Option<&'a GradPreconditioner>,
    /// System at `θ₀`, used for `ε_k`, `θ*` and the default step size.
    pub reference: Option<&'a SystemPair>,
    /// Points for the MSE against the exact solution.
    pub eval_grid: Option<&'a QuadGrid>,
    /// Regularisation for the inverse rule when `A` is reassembled per step.
    pub ridge_eps: Option<f64>,
}

/// MSE for a linear model from cached feature values: `u = u(0) + Φθ`.
struct LinearMse {
    phi: Matrix,
    offset: Vec<f64>,
}

impl LinearMse {
    fn new(model: &dyn Model, problem: &ProblemSpec, grid: &QuadGrid) -> Result<Self> {
        let n = model.n_params();
        let zeros = vec![0.0; n];
        let rows: Vec<(Vec<f64>, f64)> = grid
            .points
            .par_iter()
            .map(|&p| {
                let row = model.param_grad_functional(&zeros, p, &Jet::VALUE);
                (row, model.eval_jet(&zeros, p).u - problem.exact(p))
            })
            .collect();
        let mut data = Vec::with_capacity(rows.len() * n);
        let mut offset = Vec::with_capacity(rows.len());
        for (row, o) in rows {
            data.extend(row);
            offset.push(o);
        }
        Ok(LinearMse { phi: Matrix::from_vec(offset.len(), n, data)?, offset })
    }

    fn eval(&self, theta: &[f64]) -> Result<f64> {
        let u = self.phi.mul_vec(theta)?;
        let s: f64 = u.iter().zip(&self.offset).map(|(a, b)| (a + b) * (a + b)).sum();
        Ok(s / self.offset.len() as f64)
    }
}

enum GradientSource<'a> {
    Linear(DesignMatrix),
    General(&'a dyn Model),
}

impl GradientSource<'_> {
    fn loss_and_grad(
        &self,
        problem: &ProblemSpec,
        theta: &[f64],
        lambda: f64,
        grid: &QuadGrid,
    ) -> Result<(f64, Vec<f64>)> {
        match self {
            GradientSource::Linear(d) => {
                let e: Vec<f64> = d.j.mul_vec(theta)?.iter().zip(&d.r).map(|(a, b)| a - b).collect();
                let loss = 0.5 * e.iter().map(|v| v * v).sum::<f64>();
                Ok((loss, d.j.tr_mul_vec(&e)?))
            }
            GradientSource::General(m) => loss_and_grad(*m, problem, theta, lambda, grid),
        }
    }
}

/// `θ_{k+1} = θ_k − η M ∇L(θ_k)` with `M = I`, `P Pᵀ` or `(A + εI)⁻¹`.
///
/// Linear models evaluate the gradient from cached weighted feature rows;
/// other models run the full jet machinery at every step.
pub fn run_full_gd(
    model: &dyn Model,
    problem: &ProblemSpec,
    theta0: &[f64],
    lambda: f64,
    grid: &QuadGrid,
    settings: &GDSettings,
    opts: FullGdOptions<'_>,
) -> Result<Trajectory> {
    settings.validate()?;
    let n = model.n_params();
    let source = if model.is_linear() {
        GradientSource::Linear(design_matrix(model, problem, &vec![0.0; n], lambda, grid)?)
    } else {
        GradientSource::General(model)
    };

    let eta = match settings.step_size {
        StepSize::Fixed(eta) => eta,
        StepSize::Fraction(c) => {
            let owned;
            let sys = match opts.reference {
                Some(s) => s,
                None => {
                    owned = assemble_quadrature(model, problem, theta0, lambda, grid)?;
                    &owned
                }
            };
            let a_eff = match opts.precond {
                None => sys.a.clone(),
                Some(GradPreconditioner::Transform(p)) => crate::precond::transform(p, sys)?.a,
                // (A + εI)⁻¹A has spectrum below one.
                Some(GradPreconditioner::Inverse { .. }) => SymMatrix::identity(n),
            };
            max_stable_lr(&a_eff, c.min(1.0))?
        }
    };
    let star = match opts.reference {
        Some(s) => theta_star(s).ok(),
        None => None,
    };

    let linear_mse = match (opts.eval_grid, model.is_linear()) {
        (Some(g), true) => Some(LinearMse::new(model, problem, g)?),
        _ => None,
    };

    let mut traj = Trajectory { stride: settings.stride, eta, ..Default::default() };
    let mut theta = theta0.to_vec();
    for k in 0..=settings.steps {
        let (loss, grad) = source.loss_and_grad(problem, &theta, lambda, grid)?;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::Diverged { step: k, loss });
        }
        if k % settings.stride == 0 {
            traj.thetas.push(theta.clone());
        }
        traj.losses.push(loss);
        match (&linear_mse, opts.eval_grid) {
            (Some(lm), _) => traj.mses.push(lm.eval(&theta)?),
            (None, Some(g)) => traj.mses.push(mse(model, problem, &theta, g)),
            _ => {}
        }
        if let Some(sys) = opts.reference {
            traj.eps_norms.push(norm2(&epsilon_k(sys, &theta, &grad)?));
        }
        if let Some(s) = &star {
            traj.dists.push(dist(&theta, s));
        }
        if k == settings.steps {
            break;
        }
        let dir = match opts.precond {
            None => grad,
            Some(GradPreconditioner::Inverse { a, eps }) if !model.is_linear() => {
                let _ = a;
                let fresh = assemble_quadrature(model, problem, &theta, lambda, grid)?;
                let eps = opts.ridge_eps.unwrap_or(*eps);
                grad_precondition(&GradPreconditioner::Inverse { a: fresh.a, eps }, &grad)?
            }
            Some(rule) => grad_precondition(rule, &grad)?,
        };
        for (t, d) in theta.iter_mut().zip(&dir) {
            *t -= eta * d;
        }
    }
    traj.steps = settings.steps;
    Ok(traj)
}

/// `N = ⌈ln(ε/d₀) / ln(1 − c/κ)⌉`.
pub fn predicted_steps(kappa: f64, c: f64, eps_target: f64, initial_distance: f64) -> Result<usize> {
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::BadParam(format!("kappa = {kappa} must be finite and at least 1")));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::BadParam(format!("c = {c} must lie in (0, 1)")));
    }
    if !(eps_target > 0.0 && eps_target <= initial_distance && initial_distance.is_finite()) {
        return Err(Error::BadParam("need 0 < eps_target <= initial_distance".into()));
    }
    if eps_target == initial_distance {
        return Ok(0);
    }
    let n = (eps_target / initial_distance).ln() / (1.0 - c / kappa).ln();
    // Guard against `ceil` of a value a hair above an integer.
    Ok((n - 1e-9).ceil().max(0.0) as usize)
}

/// Outcome of comparing a full and a simplified trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    /// `max_k ‖ε_k‖₂`
    pub delta: f64,
    pub min_abs_eig: f64,
    /// `δ / min|λ(A)|`
    pub bound: f64,
    pub max_deviation: f64,
    /// Step at which `‖θ_k − θ̃_k‖` is largest.
    pub argmax_step: usize,
    /// `bound − max_deviation`
    pub slack: f64,
    pub holds: bool,
}

pub fn lemma1_bound_check(full: &Trajectory, simplified: &Trajectory, a: &SymMatrix) -> Result<Lemma1Report> {
    if full.stride != 1 || simplified.stride != 1 {
        return Err(Error::BadInput("both trajectories need every step recorded".into()));
    }
    if full.thetas.len() != simplified.thetas.len() {
        return Err(Error::DimensionMismatch { expected: full.thetas.len(), got: simplified.thetas.len() });
    }
    if full.eps_norms.is_empty() {
        return Err(Error::BadInput("full trajectory carries no error-term norms".into()));
    }
    let delta = full.eps_norms.iter().fold(0.0f64, |m, v| m.max(*v));
    let min_abs_eig = eigenvalues(a)?.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let bound = if min_abs_eig > 0.0 { delta / min_abs_eig } else { f64::INFINITY };
    let (argmax_step, max_deviation) = full
        .thetas
        .iter()
        .zip(&simplified.thetas)
        .map(|(x, y)| dist(x, y))
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(Lemma1Report {
        delta,
        min_abs_eig,
        bound,
        max_deviation,
        argmax_step,
        slack: bound - max_deviation,
        holds: max_deviation <= bound,
    })
}

/// Per-step contraction factor `e^slope` from a least-squares fit of
/// `ln ‖θ_k − θ*‖` over the tail half of the recorded distances. Distances
/// below `1e-14` end the usable prefix.
pub fn convergence_rate_fit(dists: &[f64]) -> Result<f64> {
    let usable = dists.iter().position(|&d| !(d >= 1e-14)).unwrap_or(dists.len());
    if usable < 10 {
        return if usable < dists.len() {
            Err(Error::Converged { steps: usable })
        } else {
            Err(Error::BadInput(format!("need at least 10 recorded steps, got {}", dists.len())))
        };
    }
    let start = usable / 2;
    let xs: Vec<f64> = (start..usable).map(|k| k as f64).collect();
    let ys: Vec<f64> = dists[start..usable].iter().map(|d| d.ln()).collect();
    Ok(least_squares_slope(&xs, &ys).exp())
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_quadrature, Provenance};
    use crate::linalg::condition_number;
    use crate::models::{fourier1d, Fourier1DConfig};
    use crate::precond::{poisson_diag, transform, Preconditioner};
    use crate::problems::{make_grid, make_problem, ProblemKind};
    use proptest::prelude::*;

    fn system(a: SymMatrix, b: Vec<f64>, theta0: Vec<f64>) -> SystemPair {
        SystemPair { a, b, lambda: 0.0, theta0, provenance: Provenance::Quadrature, preconditioned: false }
    }

    #[test]
    fn step_size_rules() {
        assert_eq!(max_stable_lr(&SymMatrix::identity(3), 0.5).unwrap(), 0.5);
        let a = SymMatrix::from_diag(&[1.0, 4.0]).unwrap();
        assert!((max_stable_lr(&a.scaled(3.0), 0.5).unwrap() - 0.5 / 12.0).abs() < 1e-15);
        let neg = SymMatrix::from_diag(&[-1.0, -2.0]).unwrap();
        assert!(matches!(max_stable_lr(&neg, 0.5), Err(Error::NonPositiveSpectrum(_))));
    }

    #[test]
    fn zero_rhs_is_stationary() {
        let s = system(SymMatrix::from_diag(&[1.0, 2.0]).unwrap(), vec![0.0, 0.0], vec![0.3, -0.4]);
        let t = run_simplified_gd(&s, &GDSettings::new(20, 0.9)).unwrap();
        assert!(t.thetas.iter().all(|th| th == &vec![0.3, -0.4]));
    }

    #[test]
    fn diagonal_geometric_decay() {
        let d = [1.0, 3.0, 10.0];
        let s = system(SymMatrix::from_diag(&d).unwrap(), vec![1.0, 1.0, 1.0], vec![0.0; 3]);
        let t = run_simplified_gd(&s, &GDSettings::with_eta(30, 0.05)).unwrap();
        let star: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
        for (k, th) in t.thetas.iter().enumerate() {
            for j in 0..3 {
                let want = star[j] * (1.0 - (1.0 - 0.05 * d[j]).powi(k as i32));
                assert!((th[j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rate_fit_single_mode() {
        let s = system(SymMatrix::from_diag(&[2.0, 2.0]).unwrap(), vec![1.0, 0.0], vec![0.0; 2]);
        let t = run_simplified_gd(&s, &GDSettings::with_eta(40, 0.1)).unwrap();
        let f = convergence_rate_fit(&t.dists).unwrap();
        assert!((f - 0.8).abs() < 1e-6);
        assert!(matches!(convergence_rate_fit(&[1.0, 1e-15, 1e-16]), Err(Error::Converged { .. })));
        assert!(convergence_rate_fit(&[1.0, 0.5]).is_err());
    }

    #[test]
    fn predicted_step_counts() {
        assert_eq!(predicted_steps(1.0, 0.5, 1e-6, 1.0).unwrap(), 20);
        assert_eq!(predicted_steps(5.0, 0.5, 1.0, 1.0).unwrap(), 0);
        let a = predicted_steps(1e3, 0.5, 1e-6, 1.0).unwrap() as f64;
        let b = predicted_steps(1e4, 0.5, 1e-6, 1.0).unwrap() as f64;
        assert!((b / a - 10.0).abs() < 0.05);
        assert!(predicted_steps(0.5, 0.5, 1e-6, 1.0).is_err());
    }

    #[test]
    fn linear_full_gd_equals_simplified() {
        let m = fourier1d(Fourier1DConfig::new(8));
        let p = make_problem(ProblemKind::Poisson, 3.0).unwrap();
        let g = make_grid(&p, 256, 1).unwrap();
        let th0 = m.initial_params(1);
        let sys = assemble_quadrature(&m, &p, &th0, 5.0, &g).unwrap();
        let st = GDSettings::new(200, 0.9);
        let simp = run_simplified_gd(&sys, &st).unwrap();
        let opts = FullGdOptions { reference: Some(&sys), ..Default::default() };
        let full = run_full_gd(&m, &p, &th0, 5.0, &g, &st, opts).unwrap();
        for (a, b) in full.thetas.iter().zip(&simp.thetas) {
            assert!(dist(a, b) <= 1e-9 * norm2(b));
        }
        assert!(full.eps_norms.iter().all(|&e| e <= 1e-9));
        // Monotone decrease for a stable step.
        assert!(full.losses.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let r = lemma1_bound_check(&full, &simp, &sys.a).unwrap();
        assert!(r.holds && r.max_deviation < 1e-9);
    }

    #[test]
    fn gradient_preconditioning_equals_transformed_descent() {
        let m = fourier1d(Fourier1DConfig::new(6));
        let p = make_problem(ProblemKind::Poisson, 2.0).unwrap();
        let g = make_grid(&p, 128, 1).unwrap();
        let th0 = m.initial_params(2);
        let sys = assemble_quadrature(&m, &p, &th0, 2.0, &g).unwrap();
        let pc = poisson_diag(6, 1.0).unwrap();
        let tsys = transform(&pc, &sys).unwrap();
        let eta = max_stable_lr(&tsys.a, 0.9).unwrap();
        let st = GDSettings::with_eta(50, eta);
        let hat = run_simplified_gd(&tsys, &st).unwrap();
        let rule = GradPreconditioner::Transform(pc.clone());
        let full = run_full_gd(&m, &p, &th0, 2.0, &g, &st, FullGdOptions { precond: Some(&rule), ..Default::default() })
            .unwrap();
        for (a, b) in full.thetas.iter().zip(&hat.thetas) {
            let mapped = pc.apply(b).unwrap();
            assert!(dist(a, &mapped) <= 1e-9 * norm2(&mapped));
        }
        let k = condition_number(&tsys.a).unwrap();
        assert!(k < condition_number(&sys.a).unwrap());
    }

    #[test]
    fn newton_step_reaches_minimiser() {
        let m = fourier1d(Fourier1DConfig::new(5));
        let p = make_problem(ProblemKind::Poisson, 2.0).unwrap();
        let g = make_grid(&p, 128, 1).unwrap();
        let th0 = m.initial_params(3);
        let sys = assemble_quadrature(&m, &p, &th0, 1.0, &g).unwrap();
        let rule = GradPreconditioner::Inverse { a: sys.a.clone(), eps: 0.0 };
        let opts = FullGdOptions { precond: Some(&rule), reference: Some(&sys), ..Default::default() };
        let t = run_full_gd(&m, &p, &th0, 1.0, &g, &GDSettings::with_eta(1, 1.0), opts).unwrap();
        assert!(t.dists[1] <= 1e-9 * t.dists[0]);
    }

    #[test]
    fn divergence_is_reported() {
        let m = fourier1d(Fourier1DConfig::new(4));
        let p = make_problem(ProblemKind::Poisson, 1.0).unwrap();
        let g = make_grid(&p, 64, 1).unwrap();
        let r = run_full_gd(&m, &p, &m.initial_params(0), 1.0, &g, &GDSettings::with_eta(500, 1.0), Default::default());
        assert!(matches!(r, Err(Error::Diverged { .. })));
        let _ = Preconditioner::identity(1);
    }

    fn random_spd(n: usize, seed: u64) -> SymMatrix {
        let v = crate::models::standard_normal(n * n, seed);
        let q = Matrix::from_vec(n, n, v).unwrap();
        let qtq = q.transpose().matmul(&q).unwrap();
        SymMatrix::from_matrix(&qtq).unwrap().shifted(0.05)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn theorem_envelope_holds(n in 1usize..30, seed in any::<u64>()) {
            let a = random_spd(n, seed);
            let b = crate::models::standard_normal(n, seed ^ 1);
            let th0 = crate::models::standard_normal(n, seed ^ 2);
            let s = system(a.clone(), b, th0);
            let c = 0.9;
            let t = run_simplified_gd(&s, &GDSettings::new(200, c)).unwrap();
            let kappa = condition_number(&a).unwrap();
            let rate = 1.0 - c / kappa;
            for (k, d) in t.dists.iter().enumerate() {
                prop_assert!(*d <= rate.powi(k as i32) * t.dists[0] * (1.0 + 1e-9) + 1e-12);
            }
        }
    }
}
