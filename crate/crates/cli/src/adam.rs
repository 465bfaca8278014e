//! Adaptive-moment baseline used only for comparison curves.

use pinncond::assembly::{epsilon_k, loss_and_grad, mse, SystemPair};
use pinncond::linalg::norm2;
use pinncond::models::Model;
use pinncond::optim::{theta_star, Trajectory, DIVERGENCE_LOSS};
use pinncond::problems::{ProblemSpec, QuadGrid};
use pinncond::{Error, Result};

/// Fixed moment parameters; only the learning rate is configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamSettings {
    pub steps: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamSettings {
    pub fn new(steps: usize) -> Self {
        AdamSettings { steps, lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

pub fn run_adam(
    model: &dyn Model,
    problem: &ProblemSpec,
    theta0: &[f64],
    lambda: f64,
    grid: &QuadGrid,
    s: &AdamSettings,
    reference: Option<&SystemPair>,
) -> Result<Trajectory> {
    let n = theta0.len();
    let star = reference.and_then(|r| theta_star(r).ok());
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut theta = theta0.to_vec();
    let mut traj = Trajectory { stride: 1, eta: s.lr, ..Default::default() };
    for k in 0..=s.steps {
        let (loss, g) = loss_and_grad(model, problem, &theta, lambda, grid)?;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::Diverged { step: k, loss });
        }
        traj.thetas.push(theta.clone());
        traj.losses.push(loss);
        traj.mses.push(mse(model, problem, &theta, grid));
        if let Some(r) = reference {
            traj.eps_norms.push(norm2(&epsilon_k(r, &theta, &g)?));
        }
        if let Some(st) = &star {
            traj.dists.push(theta.iter().zip(st).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        }
        if k == s.steps {
            break;
        }
        let t = (k + 1) as i32;
        let (c1, c2) = (1.0 - s.beta1.powi(t), 1.0 - s.beta2.powi(t));
        for i in 0..n {
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
            theta[i] -= s.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + s.eps);
        }
    }
    traj.steps = s.steps;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pinncond::models::{fourier1d, Fourier1DConfig};
    use pinncond::problems::{make_grid, make_problem, ProblemKind};

    #[test]
    fn first_step_moves_each_coordinate_by_lr() {
        let m = fourier1d(Fourier1DConfig::new(3));
        let p = make_problem(ProblemKind::Poisson, 1.0).unwrap();
        let g = make_grid(&p, 64, 1).unwrap();
        let th0 = m.initial_params(4);
        let t = run_adam(&m, &p, &th0, 1.0, &g, &AdamSettings { lr: 0.01, ..AdamSettings::new(1) }, None).unwrap();
        for (a, b) in t.thetas[0].iter().zip(&t.thetas[1]) {
            assert!(((a - b).abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn reduces_the_loss() {
        let m = fourier1d(Fourier1DConfig::new(4));
        let p = make_problem(ProblemKind::Poisson, 1.0).unwrap();
        let g = make_grid(&p, 64, 1).unwrap();
        let t = run_adam(&m, &p, &m.initial_params(1), 1.0, &g, &AdamSettings { lr: 0.05, ..AdamSettings::new(300) }, None)
            .unwrap();
        assert!(t.final_loss() < 1e-2 * t.losses[0]);
    }
}
