//! One test per acceptance criterion. Each prints a PASS or FAIL line.

use std::io::Write;

use pinncond_cli::verify::{run_criterion, VerifyOptions};

fn criterion(id: u32) {
    let r = run_criterion(id, &VerifyOptions::default());
    // Written past the test harness capture so that the verdict always shows.
    writeln!(std::io::stdout().lock(), "{}", r.summary_line()).unwrap();
    for c in &r.checks {
        println!("    {}: {:.6e} in [{:.3e}, {:.3e}] {}", c.check.name, c.check.observed, c.check.lo, c.check.hi, if c.passed { "ok" } else { "FAILED" });
    }
    assert!(r.passed, "{}", r.summary_line());
}

#[test]
fn criterion_01_poisson_conditioning() {
    criterion(1);
}

#[test]
fn criterion_02_fourier_preconditioner() {
    criterion(2);
}

#[test]
fn criterion_03_hard_constraint_toy() {
    criterion(3);
}

#[test]
fn criterion_04_advection_conditioning() {
    criterion(4);
}

#[test]
fn criterion_05_boundary_weight_scaling() {
    criterion(5);
}

#[test]
fn criterion_06_linear_descent_agreement() {
    criterion(6);
}

#[test]
fn criterion_07_convergence_envelope() {
    criterion(7);
}

#[test]
fn criterion_08_predicted_steps() {
    criterion(8);
}

#[test]
fn criterion_09_secular_solver() {
    criterion(9);
}

#[test]
fn criterion_10_hessian_and_newton() {
    criterion(10);
}

#[test]
fn criterion_11_gradients() {
    criterion(11);
}

#[test]
fn criterion_12_training_contrast() {
    criterion(12);
}

#[test]
fn criterion_13_spectrum_clustering() {
    criterion(13);
}

#[test]
fn criterion_14_linearisation_bound() {
    criterion(14);
}

#[test]
fn perturbed_criterion_fails() {
    let r = run_criterion(9, &VerifyOptions { perturb: vec![9], ..Default::default() });
    println!("{}", r.summary_line());
    assert!(!r.passed);
}
