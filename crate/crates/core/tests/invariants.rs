//! Cross-module properties checked over randomised inputs.

use pinncond::assembly::{assemble_quadrature, assemble_split, epsilon_k, loss_and_grad};
use pinncond::lambda::{golden_min_kappa, grad_ratio_lambda, trace_ratio_lambda, DEFAULT_BRACKET, DEFAULT_TOL};
use pinncond::linalg::{condition_number, eigenvalues, norm2, SymMatrix};
use pinncond::models::{fourier1d, fourier2d, mlp, Fourier1DConfig, Fourier2DConfig, MlpConfig, Model};
use pinncond::optim::{max_stable_lr, run_full_gd, run_simplified_gd, FullGdOptions, GDSettings};
use pinncond::precond::{poisson_diag, transform, GradPreconditioner};
use pinncond::problems::{make_grid, make_problem, Point, ProblemKind};
use proptest::prelude::*;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn random_sym(n: usize, seed: u64) -> SymMatrix {
    let v = pinncond::models::standard_normal(n * n, seed);
    SymMatrix::from_fn(n, |i, j| v[i * n + j] + v[j * n + i]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn condition_number_is_scale_invariant(n in 1usize..20, seed in any::<u64>(), c in 1e-3f64..1e3) {
        let s = random_sym(n, seed);
        let k = condition_number(&s).unwrap();
        let kc = condition_number(&s.scaled(c)).unwrap();
        if k.is_finite() {
            prop_assert!((kc - k).abs() <= 1e-12 * k * 10.0, "{k} vs {kc}");
        } else {
            prop_assert!(!kc.is_finite() || kc > 1e13);
        }
    }

    #[test]
    fn assembled_systems_are_psd_and_affine_in_lambda(
        seed in any::<u64>(),
        width in 2usize..12,
        k in 1usize..8,
        lam in 0.0f64..100.0,
    ) {
        let p = make_problem(ProblemKind::Poisson, 1.0).unwrap();
        let g = make_grid(&p, 48, 1).unwrap();
        let models: Vec<Box<dyn Model>> =
            vec![Box::new(fourier1d(Fourier1DConfig::new(k))), Box::new(mlp(MlpConfig::new(1, vec![width], seed)).unwrap())];
        for m in &models {
            let th = m.initial_params(seed);
            let split = assemble_split(&**m, &p, &th, &g).unwrap();
            let a = split.matrix_at(lam).unwrap();
            let e = eigenvalues(&a).unwrap();
            let top = e[e.len() - 1].abs().max(1e-300);
            prop_assert!(e[0] >= -1e-10 * top);
            let direct = assemble_quadrature(&**m, &p, &th, lam, &g).unwrap();
            let scale = direct.a.max_abs().max(1.0);
            prop_assert!(direct.a.add_scaled(&a, -1.0).unwrap().max_abs() <= 1e-10 * scale);
            let a0 = split.matrix_at(0.0).unwrap();
            let a1 = split.matrix_at(1.0).unwrap();
            let affine = a0.add_scaled(&a1.add_scaled(&a0, -1.0).unwrap(), lam).unwrap();
            prop_assert!(affine.add_scaled(&a, -1.0).unwrap().max_abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn linear_model_jets_ignore_theta(s1 in any::<u64>(), s2 in any::<u64>(), x in -3.0f64..3.0, t in 0.0f64..1.0) {
        let one = fourier1d(Fourier1DConfig::new(5));
        let two = fourier2d(Fourier2DConfig::new(2, 3));
        let cases: [(&dyn Model, Point); 2] = [(&one, Point::x(x)), (&two, Point::xt(x, t))];
        for (m, pt) in cases {
            let (a, b) = (m.initial_params(s1), m.initial_params(s2));
            prop_assert_eq!(m.param_jets(&a, pt), m.param_jets(&b, pt));
            let u: f64 = m.param_jets(&a, pt).iter().zip(&a).map(|(j, th)| j.u * th).sum();
            let direct = m.eval_jet(&a, pt).u;
            prop_assert!((u - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn linear_gd_has_zero_error_term_and_monotone_loss(seed in any::<u64>(), k in 1usize..10, c in 0.1f64..1.0) {
        let m = fourier1d(Fourier1DConfig::new(k));
        let p = make_problem(ProblemKind::Poisson, 2.0).unwrap();
        let g = make_grid(&p, 64, 1).unwrap();
        let th0 = m.initial_params(seed);
        let sys = assemble_quadrature(&m, &p, &th0, 1.0, &g).unwrap();
        let st = GDSettings::new(40, c);
        let full = run_full_gd(&m, &p, &th0, 1.0, &g, &st, FullGdOptions { reference: Some(&sys), ..Default::default() })
            .unwrap();
        let scale = norm2(&sys.b).max(1.0);
        prop_assert!(full.eps_norms.iter().all(|&e| e <= 1e-9 * scale));
        for w in full.losses.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-14);
        }
        let theta = full.thetas.last().unwrap();
        let (_, grad) = loss_and_grad(&m, &p, theta, 1.0, &g).unwrap();
        prop_assert!(norm2(&epsilon_k(&sys, theta, &grad).unwrap()) <= 1e-9 * scale);
    }

    #[test]
    fn gradient_preconditioning_matches_transformed_descent(seed in any::<u64>(), k in 1usize..8, gamma in 0.5f64..4.0) {
        let m = fourier1d(Fourier1DConfig::new(k));
        let p = make_problem(ProblemKind::Poisson, 1.0).unwrap();
        let g = make_grid(&p, 64, 1).unwrap();
        let th0 = m.initial_params(seed);
        let sys = assemble_quadrature(&m, &p, &th0, 1.0, &g).unwrap();
        let pc = poisson_diag(k, gamma).unwrap();
        let tsys = transform(&pc, &sys).unwrap();
        let st = GDSettings::with_eta(30, max_stable_lr(&tsys.a, 0.9).unwrap());
        let hat = run_simplified_gd(&tsys, &st).unwrap();
        let rule = GradPreconditioner::Transform(pc.clone());
        let full = run_full_gd(&m, &p, &th0, 1.0, &g, &st, FullGdOptions { precond: Some(&rule), ..Default::default() })
            .unwrap();
        for (a, b) in full.thetas.iter().zip(&hat.thetas) {
            let mapped = pc.apply(b).unwrap();
            prop_assert!(dist(a, &mapped) <= 1e-9 * norm2(&mapped).max(1.0));
        }
    }

    #[test]
    fn lambda_rules_are_positive(seed in any::<u64>(), k in 1usize..10) {
        let m = fourier1d(Fourier1DConfig::new(k));
        let p = make_problem(ProblemKind::Poisson, 1.0).unwrap();
        let g = make_grid(&p, 64, 1).unwrap();
        let th = m.initial_params(seed);
        let split = assemble_split(&m, &p, &th, &g).unwrap();
        let golden = golden_min_kappa(|l| split.matrix_at(l), DEFAULT_BRACKET, DEFAULT_TOL).unwrap();
        prop_assert!(golden.lambda_star > 0.0 && golden.kappa_star >= 1.0);
        prop_assert!(trace_ratio_lambda(&m, &p, &th, &g).unwrap() > 0.0);
        prop_assert!(grad_ratio_lambda(&m, &p, &th, &g).unwrap() > 0.0);
    }
}
