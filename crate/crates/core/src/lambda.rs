//! Selection of the boundary weight `λ`.

use crate::assembly::{assemble_split, loss_and_grad};
use crate::error::{Error, Result};
use crate::linalg::{condition_number, SymMatrix};
use crate::models::Model;
use crate::optim::least_squares_slope;
use crate::problems::{ProblemSpec, QuadGrid};

pub const DEFAULT_BRACKET: (f64, f64) = (1e-4, 1e8);
pub const DEFAULT_TOL: f64 = 1e-3;
/// Log-spaced probes taken before the golden-section refinement.
const COARSE_PROBES: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSweepResult {
    pub lambda_star: f64,
    pub kappa_star: f64,
    /// Every `(λ, κ)` probed, in probe order.
    pub evaluations: Vec<(f64, f64)>,
    pub bracket: (f64, f64),
}

/// Minimises `κ(A(λ))` over `λ` in `bracket` by a coarse log-spaced scan
/// followed by golden-section search on `log λ`, stopping once the bracket's
/// relative width is below `tol`. Singular probes count as `κ = ∞`.
pub fn golden_min_kappa(
    mut assembler: impl FnMut(f64) -> Result<SymMatrix>,
    bracket: (f64, f64),
    tol: f64,
) -> Result<LambdaSweepResult> {
    golden_min_by(|lam| condition_number(&assembler(lam)?), bracket, tol)
}

/// [`golden_min_kappa`] with the condition number supplied directly, for
/// callers that measure it differently (for example on the range of a
/// singular matrix).
pub fn golden_min_by(
    mut kappa: impl FnMut(f64) -> Result<f64>,
    bracket: (f64, f64),
    tol: f64,
) -> Result<LambdaSweepResult> {
    let (lo, hi) = bracket;
    if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::BadParam(format!("bad bracket ({lo}, {hi})")));
    }
    if !(tol > 0.0) {
        return Err(Error::BadParam(format!("tolerance {tol} must be positive")));
    }
    // Work on log λ; a zero lower end is replaced by a tiny positive one.
    let lo_eff = if lo > 0.0 { lo } else { hi * 1e-16 };
    let (a, b) = (lo_eff.ln(), hi.ln());
    let mut evaluations = Vec::new();
    let mut kappa_at = |s: f64, evals: &mut Vec<(f64, f64)>| -> Result<f64> {
        let lam = s.exp();
        let k = kappa(lam)?;
        let k = if k.is_finite() && k > 0.0 { k } else { f64::INFINITY };
        evals.push((lam, k));
        Ok(k)
    };

    let step = (b - a) / (COARSE_PROBES - 1) as f64;
    let coarse: Vec<f64> = (0..COARSE_PROBES).map(|i| a + step * i as f64).collect();
    let mut best = (0usize, f64::INFINITY);
    for (i, &s) in coarse.iter().enumerate() {
        let k = kappa_at(s, &mut evaluations)?;
        if k < best.1 {
            best = (i, k);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::AllSingular);
    }

    let mut left = coarse[best.0.saturating_sub(1)];
    let mut right = coarse[(best.0 + 1).min(COARSE_PROBES - 1)];
    let width_tol = tol.ln_1p();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = right - inv_phi * (right - left);
    let mut x2 = left + inv_phi * (right - left);
    let mut f1 = kappa_at(x1, &mut evaluations)?;
    let mut f2 = kappa_at(x2, &mut evaluations)?;
    while right - left > width_tol {
        if f1 <= f2 {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - inv_phi * (right - left);
            f1 = kappa_at(x1, &mut evaluations)?;
        } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + inv_phi * (right - left);
            f2 = kappa_at(x2, &mut evaluations)?;
        }
    }

    let (lambda_star, kappa_star) = evaluations
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |b, e| if e.1 < b.1 { e } else { b });
    Ok(LambdaSweepResult { lambda_star, kappa_star, evaluations, bracket })
}

/// `λ = Tr(A_res) / Tr(A_bc)`: the ratio of the weighted squared norms of
/// `𝒟∇_θu` over the interior and of `∇_θu` over the boundary.
pub fn trace_ratio_lambda(model: &dyn Model, problem: &ProblemSpec, theta: &[f64], grid: &QuadGrid) -> Result<f64> {
    let split = assemble_split(model, problem, theta, grid)?;
    let den = split.a_bc.trace();
    if !(den > 0.0) {
        return Err(Error::ZeroBoundaryTrace);
    }
    Ok(split.a_res.trace() / den)
}

/// `λ = max_k |∂_k R| / mean_k |∂_k B|` at `θ`, with `R` the residual loss and
/// `B` the unweighted boundary loss.
pub fn grad_ratio_lambda(model: &dyn Model, problem: &ProblemSpec, theta: &[f64], grid: &QuadGrid) -> Result<f64> {
    let (_, g_res) = loss_and_grad(model, problem, theta, 0.0, grid)?;
    let (_, g_all) = loss_and_grad(model, problem, theta, 1.0, grid)?;
    let n = g_res.len() as f64;
    let mean_bc = g_all.iter().zip(&g_res).map(|(a, r)| (a - r).abs()).sum::<f64>() / n;
    if !(mean_bc > 0.0) {
        return Err(Error::ZeroBoundaryGradient);
    }
    let max_res = g_res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(max_res / mean_bc)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn scaling_exponent(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 3 {
        return Err(Error::BadInput(format!("need at least 3 pairs, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::BadInput("all values must be finite and positive".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    if lx.iter().all(|v| *v == lx[0]) {
        return Err(Error::BadInput("abscissae must not all coincide".into()));
    }
    Ok(least_squares_slope(&lx, &ly))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_poisson_closed_form;
    use crate::models::{fourier1d, Fourier1DConfig, Normalization};
    use crate::problems::{make_grid, make_problem, ProblemKind};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn poisson_matrix(k: usize) -> impl FnMut(f64) -> Result<SymMatrix> {
        move |lam| Ok(assemble_poisson_closed_form(k, lam, 1, &vec![0.0; 2 * k + 1])?.a)
    }

    #[test]
    fn synthetic_minimum() {
        // 2×2 matrix with κ(λ) = (λ−3)² + 2.
        let r = golden_min_kappa(
            |l| SymMatrix::from_diag(&[1.0, (l - 3.0).powi(2) + 2.0]),
            (1e-2, 1e2),
            1e-6,
        )
        .unwrap();
        assert!((r.lambda_star - 3.0).abs() < 1e-3);
        assert!((r.kappa_star - 2.0).abs() < 1e-6);
        assert!(r.evaluations.iter().all(|e| r.kappa_star <= e.1 + 1e-9));
    }

    #[test]
    fn all_singular_is_an_error() {
        let r = golden_min_kappa(|_| SymMatrix::from_diag(&[0.0, 1.0]), DEFAULT_BRACKET, DEFAULT_TOL);
        assert!(matches!(r, Err(Error::AllSingular)));
        assert!(golden_min_kappa(|_| SymMatrix::from_diag(&[1.0]), (2.0, 1.0), 1e-3).is_err());
    }

    #[test]
    fn poisson_lambda_star_grows_quadratically() {
        let ks = [4usize, 8, 16, 32];
        let mut lam = Vec::new();
        let mut kap = Vec::new();
        for &k in &ks {
            let r = golden_min_kappa(poisson_matrix(k), DEFAULT_BRACKET, DEFAULT_TOL).unwrap();
            assert!(r.kappa_star >= (k as f64).powi(4));
            lam.push(r.lambda_star);
            kap.push(r.kappa_star);
        }
        let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
        let s = scaling_exponent(&xs, &lam).unwrap();
        assert!((1.7..=2.3).contains(&s), "lambda slope {s}");
        let s = scaling_exponent(&xs, &kap).unwrap();
        assert!((3.8..=4.2).contains(&s), "kappa slope {s}");
    }

    #[test]
    fn trace_ratio_closed_form() {
        let p = make_problem(ProblemKind::Poisson, 1.0).unwrap();
        let g = make_grid(&p, 512, 1).unwrap();
        for k in [1usize, 2, 5, 16] {
            let mut cfg = Fourier1DConfig::new(k);
            cfg.normalization = Normalization::Unit;
            let m = fourier1d(cfg);
            let got = trace_ratio_lambda(&m, &p, &vec![0.0; m.n_params()], &g).unwrap();
            let s4: f64 = (1..=k).map(|j| (j as f64).powi(4)).sum();
            let want = 2.0 * PI * s4 / (k as f64 + 1.0);
            assert!((got - want).abs() <= 1e-6 * want, "K={k}: {got} vs {want}");
        }
        // Grid refinement leaves the ratio unchanged.
        let m = fourier1d(Fourier1DConfig::new(3));
        let a = trace_ratio_lambda(&m, &p, &vec![0.0; 7], &make_grid(&p, 128, 1).unwrap()).unwrap();
        let b = trace_ratio_lambda(&m, &p, &vec![0.0; 7], &make_grid(&p, 256, 1).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn grad_ratio_by_hand() {
        // Orthonormal basis, forcing sin x, θ = e_ℓ on the sine mode of
        // frequency ℓ ≠ 1: ∇R = ℓ⁴ e_ℓ (the target lies on mode 1 and is not
        // active), ∇B = v (vᵀθ − 0) with vᵀe_ℓ = 0 for sine modes.
        let k = 4usize;
        let m = fourier1d(Fourier1DConfig::new(k));
        let p = make_problem(ProblemKind::Poisson, 1.0).unwrap();
        let g = make_grid(&p, 512, 1).unwrap();
        // Index order −K..=K, sine modes at positive indices.
        let l = 3usize;
        let mut theta = vec![0.0; 2 * k + 1];
        theta[k + l] = 1.0;
        theta[k - 2] = 0.5; // cos 2x, boundary value 0.5/√π at both ends
        let got = grad_ratio_lambda(&m, &p, &theta, &g).unwrap();
        let v = crate::assembly::poisson_boundary_vector(k);
        let vt: f64 = v.iter().zip(&theta).map(|(a, b)| a * b).sum();
        let mean_bc = v.iter().map(|vi| (vi * vt).abs()).sum::<f64>() / (2 * k + 1) as f64;
        let max_res = (l as f64).powi(4).max(16.0 * 0.5);
        let want = max_res / mean_bc;
        assert!((got - want).abs() <= 1e-8 * want, "{got} vs {want}");
        let mut zero_bc = vec![0.0; 2 * k + 1];
        zero_bc[k + 2] = 1.0;
        assert!(matches!(grad_ratio_lambda(&m, &p, &zero_bc, &g), Err(Error::ZeroBoundaryGradient)));
    }

    #[test]
    fn exponent_of_power_laws() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let y4: Vec<f64> = xs.iter().map(|x: &f64| x.powi(4)).collect();
        assert!((scaling_exponent(&xs, &y4).unwrap() - 4.0).abs() < 1e-9);
        let y2: Vec<f64> = xs.iter().map(|x| 7.0 * x * x).collect();
        assert!((scaling_exponent(&xs, &y2).unwrap() - 2.0).abs() < 1e-9);
        assert!(scaling_exponent(&xs[..2], &y2[..2]).is_err());
        assert!(scaling_exponent(&[1.0, 2.0, -1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(30))]

        #[test]
        fn golden_never_worse_than_probes(c in 0.01f64..1e3, d in 0.5f64..50.0) {
            let r = golden_min_kappa(
                |l| SymMatrix::from_diag(&[1.0 + l / c, d + c / l.max(1e-300)]),
                DEFAULT_BRACKET,
                DEFAULT_TOL,
            ).unwrap();
            prop_assert!(r.evaluations.iter().all(|e| r.kappa_star <= e.1 + 1e-9));
            prop_assert!(r.lambda_star > 0.0);
        }
    }
}
