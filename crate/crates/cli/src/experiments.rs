//! Computations behind the subcommands, free of file handling.

use std::f64::consts::PI;
use std::time::Instant;

use pinncond::assembly::{
    assemble_advection_closed_form, assemble_poisson_closed_form, assemble_split, design_matrix,
    hard_bc_advection_closed_form, SplitSystem, SystemPair, DENSE_BUDGET,
};
use pinncond::lambda::{golden_min_by, grad_ratio_lambda, trace_ratio_lambda, LambdaSweepResult, DEFAULT_BRACKET, DEFAULT_TOL};
use pinncond::linalg::{
    condition_number_of_spectrum, eigenvalues, gram_spectrum, range_condition_number, SymMatrix,
};
use pinncond::models::{
    ff_mlp, fourier1d, fourier2d, hard_bc_multiplicative_1d, hard_bc_subtractive_1d, mlp, sin_eta, AlphaRule,
    Basis2D, Fourier1DConfig, Fourier2DConfig, MlpConfig, Model, Normalization,
};
use pinncond::optim::{convergence_rate_fit, run_full_gd, FullGdOptions, GDSettings, Trajectory};
use pinncond::precond::{
    advection_diag, helmholtz_diag, poisson_diag, transform, GradPreconditioner, Preconditioner, ResonancePolicy,
};
use pinncond::problems::{make_grid, make_problem, ProblemSpec, QuadGrid};
use pinncond::{Error, Result};

use crate::adam::{run_adam, AdamSettings};
use crate::config::{AssemblyKind, Basis, ExperimentConfig, KappaKind, LambdaMode, ModelKind, Optimizer, Problem, Variant};

/// Relative floor separating the range of a singular matrix from its kernel.
pub const RANGE_TOL: f64 = 1e-10;

pub fn kappa_of(a: &SymMatrix, kind: KappaKind) -> Result<f64> {
    let e = eigenvalues(a)?;
    Ok(match kind {
        KappaKind::Full => condition_number_of_spectrum(&e),
        KappaKind::Range => range_condition_number(&e, RANGE_TOL),
    })
}

/// Problem, model and quadrature for one value of the swept parameter.
#[derive(Debug)]
pub struct Setup {
    pub problem: ProblemSpec,
    pub model: Box<dyn Model>,
    pub grid: QuadGrid,
    /// Fourier cutoff (spatial cutoff for space-time models).
    pub k_max: usize,
}

pub fn setup(cfg: &ExperimentConfig, param: f64) -> Result<Setup> {
    let kind = cfg.problem.kind;
    let (problem_param, k_max) = match kind {
        Problem::Poisson => (cfg.problem.wave, param.round() as usize),
        Problem::Helmholtz => (param, cfg.problem.k_list[0]),
        Problem::Advection => (param, cfg.problem.k_list[0]),
    };
    let problem = make_problem(kind.kind(), problem_param)?;
    let net = |input_dim| MlpConfig::new(input_dim, cfg.model.hidden.clone(), cfg.seed);
    let model: Box<dyn Model> = match (cfg.model.kind, kind) {
        (ModelKind::Fourier, Problem::Advection) => {
            let mut c = Fourier2DConfig::new(k_max, cfg.model.kt);
            c.basis = match cfg.model.basis {
                Basis::CosSin => Basis2D::CosSin,
                Basis::Hartley => Basis2D::Hartley,
            };
            Box::new(fourier2d(c))
        }
        (ModelKind::Fourier, _) => Box::new(fourier1d(Fourier1DConfig::new(k_max))),
        (ModelKind::Mlp, _) => Box::new(mlp(net(problem.input_dim()))?),
        (ModelKind::FfMlp, Problem::Advection) => {
            return Err(Error::BadParam("Fourier-feature networks are one-dimensional".into()))
        }
        (ModelKind::FfMlp, _) => Box::new(ff_mlp(cfg.model.ff_k, AlphaRule::InverseSquare, net(1))?),
    };
    let grid = make_grid(&problem, cfg.grid.n_x, cfg.grid.n_t)?;
    Ok(Setup { problem, model, grid, k_max })
}

fn initial_theta(cfg: &ExperimentConfig, model: &dyn Model) -> Vec<f64> {
    if cfg.train.zero_init {
        vec![0.0; model.n_params()]
    } else {
        model.initial_params(cfg.seed)
    }
}

/// Source of `(A(λ), B(λ))` for a linear model.
pub enum Systems {
    Split(SplitSystem),
    ClosedPoisson { k_max: usize, wave: u32 },
    /// Rescaled space-time matrix; `λ` is converted to the rescaled units.
    ClosedAdvection { kx: usize, kt: usize, beta: f64 },
}

impl Systems {
    pub fn new(cfg: &ExperimentConfig, s: &Setup, theta0: &[f64]) -> Result<Self> {
        let closed = cfg.problem.assembly == AssemblyKind::ClosedForm && cfg.model.kind == ModelKind::Fourier;
        match (closed, cfg.problem.kind) {
            (true, Problem::Poisson) => {
                if theta0.iter().any(|v| *v != 0.0) || cfg.problem.wave.fract() != 0.0 || cfg.problem.wave < 1.0 {
                    return Err(Error::BadParam("closed-form Poisson needs θ₀ = 0 and a positive integer wave".into()));
                }
                Ok(Systems::ClosedPoisson { k_max: s.k_max, wave: cfg.problem.wave as u32 })
            }
            (true, Problem::Advection) => {
                Ok(Systems::ClosedAdvection { kx: s.k_max, kt: cfg.model.kt, beta: s.problem.param })
            }
            _ => Ok(Systems::Split(assemble_split(&*s.model, &s.problem, theta0, &s.grid)?)),
        }
    }

    pub fn at(&self, lambda: f64) -> Result<SystemPair> {
        match self {
            Systems::Split(sp) => sp.at(lambda),
            Systems::ClosedPoisson { k_max, wave } => {
                assemble_poisson_closed_form(*k_max, lambda, *wave, &vec![0.0; 2 * k_max + 1])
            }
            Systems::ClosedAdvection { kx, kt, beta } => {
                let n = (2 * kx + 1) * (2 * kt + 1);
                assemble_advection_closed_form(*kx, *kt, beta / (2.0 * PI), lambda / (4.0 * PI * PI), &vec![0.0; n])
            }
        }
    }

    /// Diagonal Fourier preconditioner matching the parameter layout.
    pub fn preconditioner(&self, cfg: &ExperimentConfig, s: &Setup) -> Result<Preconditioner> {
        if cfg.model.kind != ModelKind::Fourier {
            return Err(Error::BadParam("diagonal preconditioners need a Fourier model".into()));
        }
        match (self, cfg.problem.kind) {
            (Systems::ClosedAdvection { kx, kt, beta }, _) => {
                let m = fourier2d(Fourier2DConfig { basis: Basis2D::Hartley, ..Fourier2DConfig::new(*kx, *kt) });
                advection_diag(&m.modes(), beta / (2.0 * PI), 1.0, ResonancePolicy::UnitFactor)
            }
            (_, Problem::Poisson) => poisson_diag(s.k_max, cfg.problem.gamma),
            (_, Problem::Helmholtz) => helmholtz_diag(s.k_max, s.problem.param),
            (_, Problem::Advection) => {
                let m = fourier2d(Fourier2DConfig {
                    basis: match cfg.model.basis {
                        Basis::CosSin => Basis2D::CosSin,
                        Basis::Hartley => Basis2D::Hartley,
                    },
                    ..Fourier2DConfig::new(s.k_max, cfg.model.kt)
                });
                advection_diag(&m.modes(), s.problem.param, 2.0 * PI, ResonancePolicy::UnitFactor)
            }
        }
    }
}

fn matrix(systems: &Systems, lambda: f64, p: Option<&Preconditioner>) -> Result<SymMatrix> {
    let sys = systems.at(lambda)?;
    Ok(match p {
        Some(p) => transform(p, &sys)?.a,
        None => sys.a,
    })
}

/// `κ` minimised over `λ`.
pub fn golden(systems: &Systems, p: Option<&Preconditioner>, kind: KappaKind) -> Result<LambdaSweepResult> {
    golden_min_by(|l| kappa_of(&matrix(systems, l, p)?, kind), DEFAULT_BRACKET, DEFAULT_TOL)
}

/// Geometric mean of the gradient-ratio rule over `seeds` initialisations.
pub fn grad_ratio_mean(s: &Setup, seed: u64, seeds: u64) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..seeds {
        let th = s.model.initial_params(seed.wrapping_add(i));
        acc += grad_ratio_lambda(&*s.model, &s.problem, &th, &s.grid)?.ln();
    }
    Ok((acc / seeds as f64).exp())
}

/// `λ` under the configured rule, for the raw (`p = None`) or preconditioned
/// system. Only the golden rule depends on the preconditioner.
pub fn choose_lambda(
    cfg: &ExperimentConfig,
    s: &Setup,
    systems: &Systems,
    p: Option<&Preconditioner>,
) -> Result<f64> {
    match cfg.problem.lambda_mode {
        LambdaMode::Fixed => Ok(cfg.problem.lambda),
        LambdaMode::Golden => Ok(golden(systems, p, cfg.problem.kappa)?.lambda_star),
        LambdaMode::Trace => {
            trace_ratio_lambda(&*s.model, &s.problem, &s.model.initial_params(cfg.seed), &s.grid)
        }
        LambdaMode::GradRatio => grad_ratio_mean(s, cfg.seed, cfg.problem.grad_ratio_seeds),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondRow {
    pub param: f64,
    pub lambda_star: f64,
    pub kappa_raw: f64,
    pub kappa_precond: f64,
}

pub fn condnum_point(cfg: &ExperimentConfig, param: f64) -> Result<CondRow> {
    let s = setup(cfg, param)?;
    if !s.model.is_linear() {
        return Err(Error::BadParam("condition-number sweeps need a linear model".into()));
    }
    let systems = Systems::new(cfg, &s, &vec![0.0; s.model.n_params()])?;
    let lambda_star = choose_lambda(cfg, &s, &systems, None)?;
    let kappa_raw = kappa_of(&matrix(&systems, lambda_star, None)?, cfg.problem.kappa)?;
    let p = systems.preconditioner(cfg, &s)?;
    let kappa_precond = match cfg.problem.lambda_mode {
        LambdaMode::Golden => golden(&systems, Some(&p), cfg.problem.kappa)?.kappa_star,
        _ => kappa_of(&matrix(&systems, lambda_star, Some(&p))?, cfg.problem.kappa)?,
    };
    Ok(CondRow { param, lambda_star, kappa_raw, kappa_precond })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    Diverged { step: usize },
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub param: f64,
    pub variant: Variant,
    pub lambda: f64,
    /// Condition number of the (transformed) system matrix at `θ₀`.
    pub kappa: Option<f64>,
    pub trajectory: Trajectory,
    pub rate: Option<f64>,
    pub wall_seconds: f64,
    pub status: RunStatus,
}

pub fn train_point(cfg: &ExperimentConfig, param: f64, variant: Variant) -> Result<TrainOutcome> {
    let start = Instant::now();
    let s = setup(cfg, param)?;
    let theta0 = initial_theta(cfg, &*s.model);
    let n = s.model.n_params();
    let dense = n <= DENSE_BUDGET;
    // Training always runs on the quadrature loss, so the reference system
    // is assembled on the same grid.
    let systems = if dense || s.model.is_linear() {
        Some(Systems::Split(assemble_split(&*s.model, &s.problem, &theta0, &s.grid)?))
    } else {
        None
    };
    let pc = match (variant, &systems) {
        (Variant::Precond, Some(sy)) => Some(sy.preconditioner(cfg, &s)?),
        (Variant::Precond, None) => return Err(Error::BudgetExceeded { n, limit: DENSE_BUDGET }),
        _ => None,
    };
    let lambda = match (&systems, cfg.problem.lambda_mode) {
        (Some(sys), _) => choose_lambda(cfg, &s, sys, pc.as_ref())?,
        (None, LambdaMode::Fixed) => cfg.problem.lambda,
        (None, _) => return Err(Error::BudgetExceeded { n, limit: DENSE_BUDGET }),
    };
    let reference = match &systems {
        Some(sys) => Some(sys.at(lambda)?),
        None => None,
    };
    let kappa = match (&reference, &pc) {
        (Some(r), Some(p)) => Some(kappa_of(&transform(p, r)?.a, cfg.problem.kappa)?),
        (Some(r), None) => Some(kappa_of(&r.a, cfg.problem.kappa)?),
        _ => None,
    };
    let rule = match (variant, &pc, &reference) {
        (Variant::Precond, Some(p), _) => Some(GradPreconditioner::Transform(p.clone())),
        (Variant::Inverse, _, Some(r)) => Some(GradPreconditioner::Inverse { a: r.a.clone(), eps: cfg.train.ridge_eps }),
        (Variant::Inverse, _, None) => return Err(Error::BudgetExceeded { n, limit: DENSE_BUDGET }),
        _ => None,
    };
    let result = match cfg.train.optimizer {
        Optimizer::Gd => {
            let settings = if reference.is_some() {
                GDSettings::new(cfg.train.steps, cfg.train.c)
            } else {
                return Err(Error::BadParam("gradient descent needs a dense reference for its step size".into()));
            };
            let opts = FullGdOptions {
                precond: rule.as_ref(),
                reference: reference.as_ref(),
                eval_grid: Some(&s.grid),
                ridge_eps: Some(cfg.train.ridge_eps),
            };
            run_full_gd(&*s.model, &s.problem, &theta0, lambda, &s.grid, &settings, opts)
        }
        Optimizer::Adam => {
            if rule.is_some() {
                return Err(Error::BadParam("the adaptive baseline runs without preconditioning".into()));
            }
            let settings = AdamSettings { lr: cfg.train.adam_lr, ..AdamSettings::new(cfg.train.steps) };
            run_adam(&*s.model, &s.problem, &theta0, lambda, &s.grid, &settings, reference.as_ref())
        }
    };
    let (trajectory, status) = match result {
        Ok(t) => (t, RunStatus::Ok),
        Err(Error::Diverged { step, .. }) => (Trajectory::default(), RunStatus::Diverged { step }),
        Err(e) => (Trajectory::default(), RunStatus::Failed(e.to_string())),
    };
    let rate = convergence_rate_fit(&trajectory.dists).ok();
    Ok(TrainOutcome {
        param,
        variant,
        lambda,
        kappa,
        trajectory,
        rate,
        wall_seconds: start.elapsed().as_secs_f64(),
        status,
    })
}

/// Condition numbers of the one-mode toy problem `{cos x, 1, sin x}` under
/// the three ways of imposing `u(±π) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTable {
    pub soft_lambda_star: f64,
    pub soft: f64,
    pub multiplicative: f64,
    pub subtractive: f64,
}

pub fn hardbc_toy(tol: f64) -> Result<ToyTable> {
    let problem = make_problem(pinncond::problems::ProblemKind::Poisson, 1.0)?;
    let grid = make_grid(&problem, 64, 1)?;
    let basis = || {
        let mut c = Fourier1DConfig::new(1);
        c.normalization = Normalization::Unit;
        Box::new(fourier1d(c)) as Box<dyn Model>
    };
    let soft = assemble_split(&*basis(), &problem, &[0.0; 3], &grid)?;
    let r = golden_min_by(
        |l| Ok(condition_number_of_spectrum(&eigenvalues(&soft.matrix_at(l)?)?)),
        DEFAULT_BRACKET,
        tol,
    )?;
    let kappa_hard = |m: &dyn Model| -> Result<f64> {
        let sp = assemble_split(m, &problem, &vec![0.0; m.n_params()], &grid)?;
        Ok(condition_number_of_spectrum(&eigenvalues(&sp.a_res)?))
    };
    let mult = hard_bc_multiplicative_1d(basis(), sin_eta())?;
    let sub = hard_bc_subtractive_1d(basis(), true)?;
    Ok(ToyTable {
        soft_lambda_star: r.lambda_star,
        soft: r.kappa_star,
        multiplicative: kappa_hard(&mult)?,
        subtractive: kappa_hard(&sub)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardBcRow {
    pub beta: f64,
    pub lambda: f64,
    pub kappa_soft: f64,
    pub kappa_hard: f64,
}

/// Soft and hard initial-condition conditioning of the space-time Hartley
/// system. The hard matrix drops its identically vanishing rows first.
pub fn hardbc_advection(kx: usize, kt: usize, beta: f64, lambdas: &[f64]) -> Result<Vec<HardBcRow>> {
    let b = beta / (2.0 * PI);
    let hard = hard_bc_advection_closed_form(kx, kt, b)?;
    let keep: Vec<usize> = (0..hard.dim()).filter(|&i| hard.row(i).iter().any(|v| *v != 0.0)).collect();
    let kappa_hard = condition_number_of_spectrum(&eigenvalues(&hard.submatrix(&keep)?)?);
    let n = (2 * kx + 1) * (2 * kt + 1);
    lambdas
        .iter()
        .map(|&lambda| {
            let soft = assemble_advection_closed_form(kx, kt, b, lambda / (4.0 * PI * PI), &vec![0.0; n])?;
            Ok(HardBcRow { beta, lambda, kappa_soft: condition_number_of_spectrum(&eigenvalues(&soft.a)?), kappa_hard })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub model: &'static str,
    pub n_params: usize,
    /// Eigenvalues of `A`, ascending, zero-padded to `n_params` when the
    /// quadrature has fewer rows than parameters.
    pub eigenvalues: Vec<f64>,
}

impl SpectrumResult {
    pub fn top(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&0.0)
    }

    pub fn count_below(&self, rel: f64) -> usize {
        let t = rel * self.top();
        self.eigenvalues.iter().filter(|v| **v <= t).count()
    }

    pub fn count_above(&self, rel: f64) -> usize {
        self.eigenvalues.len() - self.count_below(rel)
    }
}

/// Spectra of `A` on the Poisson problem for the plain network, the
/// preconditioned Fourier model and the Fourier-feature network.
pub fn spectra(cfg: &ExperimentConfig) -> Result<Vec<SpectrumResult>> {
    let problem = make_problem(pinncond::problems::ProblemKind::Poisson, cfg.problem.wave)?;
    let grid = make_grid(&problem, cfg.grid.n_x, 1)?;
    let lambda = cfg.problem.lambda;
    let net = MlpConfig::new(1, cfg.model.hidden.clone(), cfg.seed);
    let of_model = |name: &'static str, m: &dyn Model| -> Result<SpectrumResult> {
        let th = m.initial_params(cfg.seed);
        let d = design_matrix(m, &problem, &th, lambda, &grid)?;
        let rows = d.j.rows().min(d.j.cols());
        if rows > DENSE_BUDGET {
            return Err(Error::BudgetExceeded { n: rows, limit: DENSE_BUDGET });
        }
        Ok(SpectrumResult { model: name, n_params: m.n_params(), eigenvalues: gram_spectrum(&d.j)? })
    };
    let mlp_res = of_model("mlp", &mlp(net.clone())?)?;
    let k = cfg.problem.k_list[0];
    let gamma = cfg.problem.gamma;
    let sys = assemble_poisson_closed_form(k, 2.0 * PI / (gamma * gamma), 1, &vec![0.0; 2 * k + 1])?;
    let pre = transform(&poisson_diag(k, gamma)?, &sys)?;
    let fourier_res =
        SpectrumResult { model: "fourier_precond", n_params: 2 * k + 1, eigenvalues: eigenvalues(&pre.a)? };
    let ff_res = of_model("ff_mlp", &ff_mlp(cfg.model.ff_k, AlphaRule::InverseSquare, net)?)?;
    Ok(vec![mlp_res, fourier_res, ff_res])
}
