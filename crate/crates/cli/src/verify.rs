//! The acceptance suite. Every criterion reduces to checks of the form
//! `lo ≤ observed ≤ hi`; failures are data, not errors.

use std::f64::consts::PI;
use std::time::Instant;

use pinncond::assembly::{
    assemble_advection_closed_form, assemble_poisson_closed_form, assemble_quadrature, assemble_split, hessian_fd, loss_and_grad, SystemPair,
};
use pinncond::lambda::{golden_min_kappa, scaling_exponent, trace_ratio_lambda, DEFAULT_BRACKET, DEFAULT_TOL};
use pinncond::linalg::{
    eigenvalues, jacobi_eigh, norm2, secular_rank_one_eigenvalues, RankOneUpdate, SymMatrix,
};
use pinncond::models::{
    ff_mlp, fourier1d, fourier2d, hard_bc_advection, hard_bc_multiplicative_1d, hard_bc_subtractive_1d, mlp,
    sin_eta, standard_normal, AlphaRule, Basis2D, Fourier1DConfig, Fourier2DConfig, MlpConfig, Model, Normalization,
};
use pinncond::optim::{
    lemma1_bound_check, max_stable_lr, predicted_steps, run_full_gd, run_simplified_gd, theta_star, FullGdOptions,
    GDSettings,
};
use pinncond::precond::{advection_diag, poisson_diag, transform, GradPreconditioner, ResonancePolicy};
use pinncond::problems::{make_grid, make_problem, ProblemKind};
use pinncond::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Basis, ExperimentConfig, KappaKind, Problem};
use crate::experiments::{golden, grad_ratio_mean, hardbc_toy, kappa_of, setup, spectra, Systems};
use crate::output::SCHEMA_VERSION;

pub const CRITERIA: [(u32, &str); 14] = [
    (1, "Poisson conditioning grows like K^4"),
    (2, "Fourier preconditioner spectrum"),
    (3, "hard-constraint toy table"),
    (4, "advection conditioning"),
    (5, "boundary weight scaling"),
    (6, "simplified and full descent agree for linear models"),
    (7, "linear convergence envelope"),
    (8, "predicted step counts"),
    (9, "secular eigenvalue solver"),
    (10, "Hessian identity and Newton step"),
    (11, "gradient correctness"),
    (12, "training contrast"),
    (13, "spectrum clustering"),
    (14, "linearisation bound for a network"),
];

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Check {
    pub fn within(name: &str, observed: f64, lo: f64, hi: f64) -> Self {
        Check { name: name.into(), observed, lo, hi }
    }

    pub fn at_most(name: &str, observed: f64, hi: f64) -> Self {
        Self::within(name, observed, f64::NEG_INFINITY, hi)
    }

    pub fn at_least(name: &str, observed: f64, lo: f64) -> Self {
        Self::within(name, observed, lo, f64::INFINITY)
    }

    pub fn near(name: &str, observed: f64, target: f64, tol: f64) -> Self {
        Self::within(name, observed, target - tol, target + tol)
    }

    pub fn passed(&self) -> bool {
        self.lo <= self.observed && self.observed <= self.hi
    }

    /// Distance to the nearer bound; negative on failure.
    pub fn margin(&self) -> f64 {
        if self.observed.is_nan() {
            return f64::NEG_INFINITY;
        }
        (self.observed - self.lo).min(self.hi - self.observed)
    }

    /// Moves the finite bound just past the observed value, so that the
    /// check must fail. Used to test the harness itself.
    fn tightened(&mut self) {
        let step = self.observed.abs().max(1e-300) * 1e-3;
        if self.hi.is_finite() {
            self.hi = self.observed - step;
        } else {
            self.lo = self.observed + step;
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckReport {
    #[serde(flatten)]
    pub check: Check,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub runtime_seconds: f64,
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CriterionReport {
    /// One line: id, verdict, title and the first failing (or last) check.
    pub fn summary_line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let detail = match (&self.error, self.checks.iter().find(|c| !c.passed).or(self.checks.last())) {
            (Some(e), _) => format!("error: {e}"),
            (None, Some(c)) => {
                format!("{} = {:.6e} in [{:.3e}, {:.3e}]", c.check.name, c.check.observed, c.check.lo, c.check.hi)
            }
            (None, None) => String::new(),
        };
        format!("criterion {:2} {verdict} {} ({:.1}s): {detail}", self.id, self.title, self.runtime_seconds)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyOptions {
    /// Criteria whose tolerances are deliberately made unattainable.
    pub perturb: Vec<u32>,
    /// Criteria to run; empty means all.
    pub only: Vec<u32>,
}

pub fn run_criterion(id: u32, opts: &VerifyOptions) -> CriterionReport {
    let title = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or("unknown criterion").to_string();
    let start = Instant::now();
    let result = match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(),
        10 => criterion_10(),
        11 => criterion_11(),
        12 => criterion_12(),
        13 => criterion_13(),
        14 => criterion_14(),
        _ => Err(pinncond::Error::BadParam(format!("no criterion {id}"))),
    };
    let runtime_seconds = start.elapsed().as_secs_f64();
    let (mut checks, error) = match result {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    if opts.perturb.contains(&id) {
        checks.iter_mut().for_each(Check::tightened);
    }
    let checks: Vec<CheckReport> =
        checks.into_iter().map(|c| CheckReport { margin: c.margin(), passed: c.passed(), check: c }).collect();
    let passed = error.is_none() && !checks.is_empty() && checks.iter().all(|c| c.passed);
    CriterionReport { id, title, passed, runtime_seconds, checks, error }
}

pub fn run_all(opts: &VerifyOptions) -> VerifyReport {
    let ids: Vec<u32> =
        CRITERIA.iter().map(|c| c.0).filter(|id| opts.only.is_empty() || opts.only.contains(id)).collect();
    let criteria: Vec<CriterionReport> = ids.par_iter().map(|&id| run_criterion(id, opts)).collect();
    VerifyReport { schema_version: SCHEMA_VERSION, passed: criteria.iter().all(|c| c.passed), criteria }
}

fn ks_as_f64(ks: &[usize]) -> Vec<f64> {
    ks.iter().map(|&k| k as f64).collect()
}

fn poisson_closed_cfg() -> ExperimentConfig {
    ExperimentConfig::preset("poisson-fourier").expect("preset exists")
}

fn advection_closed_cfg() -> ExperimentConfig {
    ExperimentConfig::preset("advection-fourier").expect("preset exists")
}

/// Golden-section `κ*` (and `λ*`) of the configured system at one sweep value.
fn golden_at(cfg: &ExperimentConfig, param: f64, precond: bool) -> Result<(f64, f64)> {
    let s = setup(cfg, param)?;
    let systems = Systems::new(cfg, &s, &vec![0.0; s.model.n_params()])?;
    let p = if precond { Some(systems.preconditioner(cfg, &s)?) } else { None };
    let r = golden(&systems, p.as_ref(), cfg.problem.kappa)?;
    Ok((r.lambda_star, r.kappa_star))
}

fn criterion_1() -> Result<Vec<Check>> {
    let cfg = poisson_closed_cfg();
    let ks = [2usize, 4, 8, 16, 32];
    let kap = ks.iter().map(|&k| Ok(golden_at(&cfg, k as f64, false)?.1)).collect::<Result<Vec<f64>>>()?;
    let worst = ks.iter().zip(&kap).map(|(&k, c)| c / (k as f64).powi(4)).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::at_least("min kappa*/K^4", worst, 1.0),
        Check::within("log-log slope", scaling_exponent(&ks_as_f64(&ks), &kap)?, 3.8, 4.2),
    ])
}

/// `{1 (2K−1 times), ω₋, ω₊}` with `η = Σ k⁻⁴`.
pub fn preconditioned_poisson_spectrum(k_max: usize, gamma: f64) -> Vec<f64> {
    let eta: f64 = (1..=k_max).map(|k| (k as f64).powi(-4)).sum();
    let g2 = gamma * gamma;
    let root = (2.0 * eta / g2 + eta * eta / (g2 * g2)).sqrt();
    let mut v = vec![1.0; 2 * k_max - 1];
    v.push(1.0 + eta / g2 - root);
    v.push(1.0 + eta / g2 + root);
    v.sort_by(f64::total_cmp);
    v
}

fn preconditioned_poisson(k_max: usize, gamma: f64) -> Result<SymMatrix> {
    let sys = assemble_poisson_closed_form(k_max, 2.0 * PI / (gamma * gamma), 1, &vec![0.0; 2 * k_max + 1])?;
    Ok(transform(&poisson_diag(k_max, gamma)?, &sys)?.a)
}

fn criterion_2() -> Result<Vec<Check>> {
    let k16 = kappa_of(&preconditioned_poisson(16, 1.0)?, KappaKind::Full)?;
    let k64 = kappa_of(&preconditioned_poisson(64, 1.0)?, KappaKind::Full)?;
    let mut checks = vec![Check::within("|kappa(16) - kappa(64)| / kappa(64)", (k16 - k64).abs() / k64, 0.0, 0.01)];
    for gamma in [100.0, 1000.0] {
        let k = kappa_of(&preconditioned_poisson(16, gamma)?, KappaKind::Full)?;
        checks.push(Check::at_most(&format!("gamma (kappa - 1) at gamma = {gamma}"), gamma * (k - 1.0), 3.5));
    }
    let mut worst = 0.0f64;
    for k_max in [16usize, 64] {
        for gamma in [1.0, 100.0, 1000.0] {
            let e = eigenvalues(&preconditioned_poisson(k_max, gamma)?)?;
            let want = preconditioned_poisson_spectrum(k_max, gamma);
            worst = e.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        }
    }
    checks.push(Check::at_most("max eigenvalue deviation from closed form", worst, 1e-8));
    Ok(checks)
}

fn criterion_3() -> Result<Vec<Check>> {
    let t = hardbc_toy(crate::commands::TOY_TOL)?;
    Ok(vec![
        Check::near("soft kappa*", t.soft, 3.0 + 2.0 * 2f64.sqrt(), 1e-6),
        Check::near("multiplicative kappa", t.multiplicative, 4.0, 1e-6),
        Check::near("subtractive kappa", t.subtractive, 1.0, 1e-8),
    ])
}

const ADVECTION_BETAS: [f64; 5] = [2.0, 6.0, 15.0, 30.0, 60.0];

/// Golden `κ*` of the reindexed advection matrix with coefficient `β`
/// exactly as given (time frequencies are integers), raw and with the
/// diagonal `1/|k₂ + βk₁|` rescaling.
fn advection_unit_golden(k: usize, beta: f64) -> Result<(f64, f64)> {
    let n = (2 * k + 1) * (2 * k + 1);
    let assemble = |l: f64| assemble_advection_closed_form(k, k, beta, l, &vec![0.0; n]).map(|s| s.a);
    let raw = golden_min_kappa(assemble, DEFAULT_BRACKET, DEFAULT_TOL)?.kappa_star;
    let modes = fourier2d(Fourier2DConfig { basis: Basis2D::Hartley, ..Fourier2DConfig::new(k, k) }).modes();
    let p = advection_diag(&modes, beta, 1.0, ResonancePolicy::UnitFactor)?;
    let pre = golden_min_kappa(
        |l| Ok(transform(&p, &assemble_advection_closed_form(k, k, beta, l, &vec![0.0; n])?)?.a),
        DEFAULT_BRACKET,
        DEFAULT_TOL,
    )?
    .kappa_star;
    Ok((raw, pre))
}

fn criterion_4() -> Result<Vec<Check>> {
    let betas: Vec<f64> = ADVECTION_BETAS.iter().map(|b| b * PI).collect();
    let (raw, pre): (Vec<f64>, Vec<f64>) =
        betas.iter().map(|&b| advection_unit_golden(3, b)).collect::<Result<Vec<_>>>()?.into_iter().unzip();
    let hi = pre.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = pre.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::within("kappa* slope in beta", scaling_exponent(&betas, &raw)?, 1.8, 2.2),
        Check::within("preconditioned kappa spread max/min - 1", hi / lo - 1.0, 0.0, 0.1),
    ])
}

fn criterion_5() -> Result<Vec<Check>> {
    let cfg = poisson_closed_cfg();
    let ks = [4usize, 8, 16, 32];
    let xs = ks_as_f64(&ks);
    let lam = ks.iter().map(|&k| Ok(golden_at(&cfg, k as f64, false)?.0)).collect::<Result<Vec<f64>>>()?;
    let mut quad = cfg.clone();
    quad.grid.n_x = 512;
    let mut trace = Vec::new();
    let mut grad = Vec::new();
    for &k in &ks {
        let s = setup(&quad, k as f64)?;
        trace.push(trace_ratio_lambda(&*s.model, &s.problem, &vec![0.0; s.model.n_params()], &s.grid)?);
        grad.push(grad_ratio_mean(&s, 0, 32)?);
    }
    Ok(vec![
        Check::within("golden lambda* slope", scaling_exponent(&xs, &lam)?, 1.7, 2.3),
        Check::within("trace-ratio slope", scaling_exponent(&xs, &trace)?, 3.6, 4.4),
        Check::within("gradient-ratio slope (32 seeds)", scaling_exponent(&xs, &grad)?, 3.0, 4.0),
    ])
}

fn criterion_6() -> Result<Vec<Check>> {
    let m = fourier1d(Fourier1DConfig::new(8));
    let p = make_problem(ProblemKind::Poisson, 1.0)?;
    let g = make_grid(&p, 256, 1)?;
    let th0 = m.initial_params(0);
    let split = assemble_split(&m, &p, &th0, &g)?;
    let lam = pinncond::lambda::golden_min_kappa(|l| split.matrix_at(l), (1e-4, 1e8), 1e-3)?.lambda_star;
    let sys = split.at(lam)?;
    let settings = GDSettings::new(200, 0.9);
    let simp = run_simplified_gd(&sys, &settings)?;
    let opts = FullGdOptions { reference: Some(&sys), ..Default::default() };
    let full = run_full_gd(&m, &p, &th0, lam, &g, &settings, opts)?;
    let dev = full
        .thetas
        .iter()
        .zip(&simp.thetas)
        .map(|(a, b)| norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()) / norm2(b))
        .fold(0.0f64, f64::max);
    let eps = full.eps_norms.iter().cloned().fold(0.0f64, f64::max);
    Ok(vec![
        Check::at_most("max relative parameter deviation", dev, 1e-9),
        Check::at_most("max error-term norm", eps, 1e-9),
    ])
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Result<SymMatrix> {
    let q = standard_normal(n * n, rng.random());
    let shift: f64 = rng.random_range(1e-3..1.0);
    SymMatrix::from_fn(n, |i, j| (0..n).map(|k| q[k * n + i] * q[k * n + j]).sum::<f64>() / n as f64)
        .map(|s| s.shifted(shift))
}

/// Largest ratio of `‖θ̃_k − θ*‖` to its envelope `(1 − c/κ)^k ‖θ₀ − θ*‖`,
/// with a rounding allowance proportional to `κ ε_mach`. Step 0 lies on the
/// envelope by construction and is skipped.
fn envelope_ratio(sys: &SystemPair, c: f64, steps: usize) -> Result<f64> {
    let e = eigenvalues(&sys.a)?;
    let kappa = e[e.len() - 1] / e[0];
    let t = run_simplified_gd(sys, &GDSettings::new(steps, c))?;
    let star = theta_star(sys)?;
    let floor = 16.0 * f64::EPSILON * kappa * (norm2(&star) + norm2(&sys.theta0));
    let rate = 1.0 - c / kappa;
    Ok(t.dists.iter().enumerate().skip(1).map(|(k, d)| d / (rate.powi(k as i32) * t.dists[0] + floor)).fold(0.0, f64::max))
}

fn paper_systems() -> Result<Vec<SystemPair>> {
    let mut out = Vec::new();
    let cfg = poisson_closed_cfg();
    for k in [2usize, 4, 8, 16, 32] {
        let s = setup(&cfg, k as f64)?;
        let systems = Systems::new(&cfg, &s, &vec![0.0; 2 * k + 1])?;
        let lam = golden(&systems, None, KappaKind::Full)?.lambda_star;
        out.push(systems.at(lam)?);
        out.push(transform(&poisson_diag(k, 1.0)?, &systems.at(2.0 * PI)?)?);
    }
    let cfg = advection_closed_cfg();
    for b in ADVECTION_BETAS {
        let s = setup(&cfg, b * PI)?;
        let systems = Systems::new(&cfg, &s, &vec![0.0; s.model.n_params()])?;
        let lam = golden(&systems, None, KappaKind::Full)?.lambda_star;
        out.push(systems.at(lam)?);
        let p = systems.preconditioner(&cfg, &s)?;
        let lam = golden(&systems, Some(&p), KappaKind::Full)?.lambda_star;
        out.push(transform(&p, &systems.at(lam)?)?);
    }
    let problem = make_problem(ProblemKind::Poisson, 1.0)?;
    let grid = make_grid(&problem, 64, 1)?;
    let unit = || {
        let mut c = Fourier1DConfig::new(1);
        c.normalization = Normalization::Unit;
        Box::new(fourier1d(c)) as Box<dyn Model>
    };
    let toy = hardbc_toy(1e-6)?;
    out.push(assemble_split(&*unit(), &problem, &[0.0; 3], &grid)?.at(toy.soft_lambda_star)?);
    let mult = hard_bc_multiplicative_1d(unit(), sin_eta())?;
    out.push(assemble_quadrature(&mult, &problem, &[0.0; 3], 0.0, &grid)?);
    let sub = hard_bc_subtractive_1d(unit(), true)?;
    out.push(assemble_quadrature(&sub, &problem, &vec![0.0; sub.n_params()], 0.0, &grid)?);
    Ok(out)
}

fn criterion_7() -> Result<Vec<Check>> {
    let c = 0.9;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_random = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=50);
        let a = random_spd(n, &mut rng)?;
        let sys = SystemPair {
            a,
            b: standard_normal(n, rng.random()),
            lambda: 0.0,
            theta0: standard_normal(n, rng.random()),
            provenance: pinncond::assembly::Provenance::Quadrature,
            preconditioned: false,
        };
        worst_random = worst_random.max(envelope_ratio(&sys, c, 300)?);
    }
    let mut worst_paper = 0.0f64;
    for sys in paper_systems()? {
        worst_paper = worst_paper.max(envelope_ratio(&sys, c, 300)?);
    }
    Ok(vec![
        Check::at_most("random SPD: max distance / envelope", worst_random, 1.0),
        Check::at_most("model systems: max distance / envelope", worst_paper, 1.0),
    ])
}

fn criterion_8() -> Result<Vec<Check>> {
    let c = 0.9;
    let mut checks = Vec::new();
    for kappa in [1.5, 10.0, 100.0] {
        let n = 10;
        let d: Vec<f64> = (0..n).map(|i| 1.0 + (kappa - 1.0) * i as f64 / (n - 1) as f64).collect();
        let a = SymMatrix::from_diag(&d)?;
        let sys = SystemPair {
            b: d.clone(),
            a,
            lambda: 0.0,
            theta0: vec![0.0; n],
            provenance: pinncond::assembly::Provenance::Quadrature,
            preconditioned: false,
        };
        let predicted = predicted_steps(kappa, c, 1e-6, 1.0)?;
        let t = run_simplified_gd(&sys, &GDSettings::new(4 * predicted + 10, c))?;
        let d0 = t.dists[0];
        let measured = t.dists.iter().position(|&x| x <= 1e-6 * d0).unwrap_or(usize::MAX);
        checks.push(Check::within(
            &format!("measured / predicted steps at kappa = {kappa}"),
            measured as f64 / predicted as f64,
            0.5,
            2.0,
        ));
    }
    Ok(checks)
}

fn criterion_9() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    for case in 0..100 {
        let n = rng.random_range(1..=40);
        let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        // A quarter of the cases carry repeated poles.
        if case % 4 == 0 && n > 2 {
            d[1] = d[0];
        }
        d.sort_by(f64::total_cmp);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lam = rng.random_range(0.0..5.0);
        let r = RankOneUpdate::new(d.clone(), u.clone(), lam)?;
        let got = secular_rank_one_eigenvalues(&r)?;
        let dense = SymMatrix::from_fn(n, |i, j| if i == j { d[i] } else { 0.0 } + lam * u[i] * u[j])?;
        let want = jacobi_eigh(&dense)?.values;
        let unorm2: f64 = u.iter().map(|x| x * x).sum();
        let scale = d[0].abs().max(d[n - 1].abs()).max(lam * unorm2).max(1.0);
        worst = got.iter().zip(&want).map(|(a, b)| (a - b).abs() / scale).fold(worst, f64::max);
        for i in 0..n {
            let upper = if i + 1 < n { d[i + 1] } else { d[n - 1] + lam * unorm2 };
            if got[i] < d[i] || got[i] > upper {
                violations += 1;
            }
        }
    }
    Ok(vec![
        Check::at_most("max scaled deviation from Jacobi", worst, 1e-10),
        Check::at_most("interlacing violations", violations as f64, 0.0),
    ])
}

fn criterion_10() -> Result<Vec<Check>> {
    let m = fourier1d(Fourier1DConfig::new(8));
    let p = make_problem(ProblemKind::Poisson, 1.0)?;
    let g = make_grid(&p, 128, 1)?;
    let th0 = m.initial_params(10);
    let lam = 3.0;
    let sys = assemble_quadrature(&m, &p, &th0, lam, &g)?;
    let h = hessian_fd(&m, &p, &th0, lam, &g)?;
    let rel = sys.a.add_scaled(&h, -1.0)?.max_abs() / sys.a.max_abs();
    let rule = GradPreconditioner::Inverse { a: sys.a.clone(), eps: 0.0 };
    let opts = FullGdOptions { precond: Some(&rule), reference: Some(&sys), ..Default::default() };
    let t = run_full_gd(&m, &p, &th0, lam, &g, &GDSettings::with_eta(1, 1.0), opts)?;
    Ok(vec![
        Check::at_most("max |H_fd - A| / max |A|", rel, 1e-6),
        Check::at_most("distance to minimiser after one step, relative", t.dists[1] / t.dists[0], 1e-9),
    ])
}

/// `max_i |g_fd,i − g_i| / max_i |g_i|` over `coords`, with fourth-order
/// central differences of the loss.
fn gradient_error(
    model: &dyn Model,
    problem: &pinncond::problems::ProblemSpec,
    grid: &pinncond::problems::QuadGrid,
    theta: &[f64],
    coords: &[usize],
) -> Result<f64> {
    let lam = 2.0;
    let (_, g) = loss_and_grad(model, problem, theta, lam, grid)?;
    let loss = |t: &[f64]| -> Result<f64> { Ok(loss_and_grad(model, problem, t, lam, grid)?.0) };
    let fd: Vec<f64> = coords
        .par_iter()
        .map(|&i| {
            let h = 1e-3 * theta[i].abs().max(1.0);
            let at = |s: f64| {
                let mut t = theta.to_vec();
                t[i] += s * h;
                loss(&t)
            };
            Ok((-at(2.0)? + 8.0 * at(1.0)? - 8.0 * at(-1.0)? + at(-2.0)?) / (12.0 * h))
        })
        .collect::<Result<Vec<f64>>>()?;
    let scale = coords.iter().map(|&i| g[i].abs()).fold(0.0, f64::max);
    Ok(coords.iter().zip(&fd).map(|(&i, f)| (f - g[i]).abs()).fold(0.0, f64::max) / scale)
}

fn criterion_11() -> Result<Vec<Check>> {
    let poisson = make_problem(ProblemKind::Poisson, 1.0)?;
    let pg = make_grid(&poisson, 24, 1)?;
    let adv = make_problem(ProblemKind::Advection, 2.0 * PI)?;
    let ag = make_grid(&adv, 8, 6)?;
    let all = |n: usize| (0..n).collect::<Vec<_>>();
    let mut checks = Vec::new();
    let mut push = |name: &str, model: &dyn Model, problem, grid, coords: Option<Vec<usize>>| -> Result<()> {
        let theta = model.initial_params(11);
        let coords = coords.unwrap_or_else(|| all(model.n_params()));
        checks.push(Check::at_most(name, gradient_error(model, problem, grid, &theta, &coords)?, 1e-6));
        Ok(())
    };
    push("fourier", &fourier1d(Fourier1DConfig::new(8)), &poisson, &pg, None)?;
    push("mlp 1x32", &mlp(MlpConfig::new(1, vec![32], 1))?, &poisson, &pg, None)?;
    // Every bias and a seeded sample of weights of the wide network.
    let deep = mlp(MlpConfig::new(1, vec![64, 64, 64], 2))?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut sample: Vec<usize> = (0..256).map(|_| rng.random_range(0..deep.n_params())).collect();
    sample.extend(deep.n_params() - 65..deep.n_params());
    sample.sort_unstable();
    sample.dedup();
    push("mlp 3x64 (sampled coordinates)", &deep, &poisson, &pg, Some(sample))?;
    push("ff-mlp", &ff_mlp(8, AlphaRule::InverseSquare, MlpConfig::new(1, vec![32], 3))?, &poisson, &pg, None)?;
    let inner2d = Box::new(mlp(MlpConfig::new(2, vec![16], 4))?);
    push("hard initial condition (network)", &hard_bc_advection(inner2d, 1.0, false)?, &adv, &ag, None)?;
    let hartley = Fourier2DConfig { basis: Basis2D::Hartley, ..Fourier2DConfig::new(2, 2) };
    let hard_lin = hard_bc_advection(Box::new(fourier2d(hartley)), 1.0, true)?;
    push("hard initial condition (Fourier)", &hard_lin, &adv, &ag, None)?;
    let inner = || Box::new(mlp(MlpConfig::new(1, vec![16], 5)).expect("valid widths")) as Box<dyn Model>;
    push("multiplicative boundary", &hard_bc_multiplicative_1d(inner(), sin_eta())?, &poisson, &pg, None)?;
    push("subtractive boundary", &hard_bc_subtractive_1d(inner(), false)?, &poisson, &pg, None)?;
    Ok(checks)
}

fn criterion_12() -> Result<Vec<Check>> {
    let mut cfg = poisson_closed_cfg();
    cfg.problem.assembly = crate::config::AssemblyKind::Quadrature;
    cfg.grid.n_x = 256;
    let run = |cfg: &ExperimentConfig, param: f64, v| crate::experiments::train_point(cfg, param, v);
    cfg.train.steps = 500;
    let raw = run(&cfg, 16.0, crate::config::Variant::Raw)?;
    let pre = run(&cfg, 16.0, crate::config::Variant::Precond)?;
    let (lr, lp) = (raw.trajectory.final_loss(), pre.trajectory.final_loss());

    let mut adv = advection_closed_cfg();
    adv.problem.assembly = crate::config::AssemblyKind::Quadrature;
    adv.problem.kappa = KappaKind::Range;
    adv.problem.k_list = vec![5];
    adv.model.kt = 30;
    adv.model.basis = Basis::CosSin;
    adv.grid.n_x = 256;
    adv.grid.n_t = 100;
    adv.train.steps = 200;
    adv.train.zero_init = true;
    debug_assert_eq!(adv.problem.kind, Problem::Advection);
    let beta = 30.0 * PI;
    let araw = run(&adv, beta, crate::config::Variant::Raw)?;
    let apre = run(&adv, beta, crate::config::Variant::Precond)?;
    Ok(vec![
        Check::at_most("Poisson K=16 preconditioned final loss", lp, 1e-8),
        Check::at_least("Poisson raw / preconditioned final loss", lr / lp, 1e4),
        Check::at_most("advection preconditioned final MSE", apre.trajectory.final_mse(), 1e-6),
        Check::at_least(
            "advection raw / preconditioned final loss",
            araw.trajectory.final_loss() / apre.trajectory.final_loss(),
            1e4,
        ),
    ])
}

fn criterion_13() -> Result<Vec<Check>> {
    let cfg = ExperimentConfig::preset("spectrum-poisson").expect("preset exists");
    let s = spectra(&cfg)?;
    let by = |name: &str| s.iter().find(|r| r.model == name).expect("spectrum computed");
    let (net, ff) = (by("mlp"), by("ff_mlp"));
    let frac = net.count_below(cfg.spectrum.threshold) as f64 / net.eigenvalues.len() as f64;
    let gain = ff.count_above(cfg.spectrum.threshold) as f64 - net.count_above(cfg.spectrum.threshold) as f64;
    Ok(vec![
        Check::at_least("fraction of network eigenvalues below threshold", frac, 0.5),
        Check::at_least("extra eigenvalues above threshold with Fourier features", gain, 1.0),
    ])
}

fn criterion_14() -> Result<Vec<Check>> {
    let m = mlp(MlpConfig::new(1, vec![32], 0))?;
    let p = make_problem(ProblemKind::Poisson, 1.0)?;
    let g = make_grid(&p, 128, 1)?;
    let th0 = m.init();
    let lam = 1.0;
    let sys = assemble_quadrature(&m, &p, &th0, lam, &g)?;
    let eta = max_stable_lr(&sys.a, 0.9)?;
    let settings = GDSettings::with_eta(100, eta);
    let simp = run_simplified_gd(&sys, &settings)?;
    let opts = FullGdOptions { reference: Some(&sys), ..Default::default() };
    let full = run_full_gd(&m, &p, &th0, lam, &g, &settings, opts)?;
    let r = lemma1_bound_check(&full, &simp, &sys.a)?;
    // A is numerically singular for this network, so the bound above is
    // enormous. The same recurrence, e_{k+1} = (I − ηA)e_k + ηε_k with
    // ‖I − ηA‖ ≤ 1, also gives the finite-horizon bound ‖e_k‖ ≤ η Σ_{j<k} ‖ε_j‖,
    // which is attained at k = 2 and so needs a rounding allowance.
    let mut partial = 0.0;
    let mut worst = 0.0f64;
    for k in 1..full.thetas.len() {
        partial += eta * full.eps_norms[k - 1];
        let dev = norm2(&full.thetas[k].iter().zip(&simp.thetas[k]).map(|(a, b)| a - b).collect::<Vec<_>>());
        let rounding = 1e-12 * norm2(&simp.thetas[k]);
        worst = worst.max(dev / (partial + rounding));
    }
    Ok(vec![
        Check::at_most("max deviation / (max error norm / min |eigenvalue|)", r.max_deviation / r.bound, 1.0),
        Check::at_most("max deviation / accumulated error bound", worst, 1.0),
    ])
}
