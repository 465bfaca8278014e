use super::{fourier1d, mlp, Fourier1D, Fourier1DConfig, Mlp, MlpConfig, Model};
use crate::error::{Error, Result};
use crate::problems::{Jet, Point};

/// Fixed weights `α_k` of the Fourier inner layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaRule {
    /// `α_k = 1/k²`, `α₀ = 1`.
    #[default]
    InverseSquare,
    /// `α_k = 1`.
    Unit,
}

impl AlphaRule {
    pub fn alpha(&self, k: i64) -> f64 {
        match (self, k) {
            (AlphaRule::Unit, _) | (_, 0) => 1.0,
            (AlphaRule::InverseSquare, k) => 1.0 / (k * k) as f64,
        }
    }
}

/// `u(x) = Φ(Σ_k α_k c_k φ_k(x))` with a scalar-input network `Φ`.
///
/// Parameters: the `2K+1` inner coefficients `c_k` first, then the network.
#[derive(Debug, Clone, PartialEq)]
pub struct FfMlp {
    pub features: Fourier1D,
    pub alpha: AlphaRule,
    pub net: Mlp,
    alphas: Vec<f64>,
}

pub fn ff_mlp(k_max: usize, alpha: AlphaRule, mut net_cfg: MlpConfig) -> Result<FfMlp> {
    if net_cfg.input_dim != 1 {
        return Err(Error::BadParam("the inner network takes one scalar input".into()));
    }
    net_cfg.input_dim = 1;
    let features = fourier1d(Fourier1DConfig::new(k_max));
    let alphas = features.frequencies().iter().map(|&k| alpha.alpha(k)).collect();
    Ok(FfMlp { features, alpha, net: mlp(net_cfg)?, alphas })
}

impl FfMlp {
    fn n_inner(&self) -> usize {
        self.features.n_params()
    }

    fn inner(&self, coeffs: &[f64], x: f64) -> (Jet, Vec<Jet>) {
        let feats: Vec<Jet> = (0..self.n_inner()).map(|i| self.features.feature(i, x) * self.alphas[i]).collect();
        let mut z = Jet::ZERO;
        for (f, c) in feats.iter().zip(coeffs) {
            z += *f * *c;
        }
        (z, feats)
    }
}

impl Model for FfMlp {
    fn n_params(&self) -> usize {
        self.n_inner() + self.net.n_params()
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn is_linear(&self) -> bool {
        false
    }

    fn kind(&self) -> &'static str {
        "ff_mlp"
    }

    fn eval_jet(&self, theta: &[f64], p: Point) -> Jet {
        let (c, w) = theta.split_at(self.n_inner());
        let (z, _) = self.inner(c, p.x);
        self.net.forward(w, &[z]).1
    }

    fn param_jets(&self, theta: &[f64], p: Point) -> Vec<Jet> {
        let unit = [
            Jet::new(1.0, 0.0, 0.0, 0.0),
            Jet::new(0.0, 1.0, 0.0, 0.0),
            Jet::new(0.0, 0.0, 1.0, 0.0),
            Jet::new(0.0, 0.0, 0.0, 1.0),
        ];
        let lanes: Vec<Vec<f64>> = unit.iter().map(|c| self.param_grad_functional(theta, p, c)).collect();
        (0..self.n_params()).map(|i| Jet::new(lanes[0][i], lanes[1][i], lanes[2][i], lanes[3][i])).collect()
    }

    fn accumulate_functional_grad(&self, theta: &[f64], p: Point, c: &Jet, scale: f64, out: &mut [f64]) {
        let n = self.n_inner();
        let (coef, w) = theta.split_at(n);
        let (z, feats) = self.inner(coef, p.x);
        let (tape, _) = self.net.forward(w, &[z]);
        let zbar = self.net.backward(w, &tape, c, scale, &mut out[n..])[0];
        for (o, f) in out[..n].iter_mut().zip(&feats) {
            *o += f.contract(&zbar);
        }
    }

    fn initial_params(&self, seed: u64) -> Vec<f64> {
        super::standard_normal(self.n_params(), seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fd_eval_jet, fd_param_jets};

    #[test]
    fn linear_outer_layer_reduces_to_scaled_fourier() {
        // No hidden layer: Φ(z) = w z + b.
        let m = ff_mlp(3, AlphaRule::Unit, MlpConfig::new(1, vec![], 0)).unwrap();
        let mut th = m.initial_params(5);
        let n = 7;
        th[n] = 2.0;
        th[n + 1] = 0.0;
        let f = fourier1d(Fourier1DConfig::new(3));
        let scaled: Vec<f64> = th[..n].iter().map(|c| 2.0 * c).collect();
        let p = Point::x(0.9);
        let a = m.eval_jet(&th, p);
        let b = f.eval_jet(&scaled, p);
        assert!((a - b).u.abs() < 1e-14 && (a - b).d2u_dx2.abs() < 1e-13);
    }

    #[test]
    fn inner_second_derivative_bound() {
        let m = ff_mlp(8, AlphaRule::InverseSquare, MlpConfig::new(1, vec![4], 0)).unwrap();
        let th = m.initial_params(9);
        let bound: f64 = th[..17].iter().map(|c| c.abs()).sum::<f64>() / std::f64::consts::PI.sqrt();
        for i in 0..50 {
            let x = -3.0 + 0.12 * i as f64;
            let (z, _) = m.inner(&th[..17], x);
            assert!(z.d2u_dx2.abs() <= bound);
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let m = ff_mlp(3, AlphaRule::InverseSquare, MlpConfig::new(1, vec![5, 4], 1)).unwrap();
        let th = m.initial_params(4);
        let p = Point::x(-0.8);
        let a = m.eval_jet(&th, p);
        let f = fd_eval_jet(&m, &th, p, 1e-3);
        assert!((a.du_dx - f.du_dx).abs() < 1e-6 * a.du_dx.abs().max(1.0));
        assert!((a.d2u_dx2 - f.d2u_dx2).abs() < 1e-6 * a.d2u_dx2.abs().max(1.0));
        let pj = m.param_jets(&th, p);
        let fj = fd_param_jets(&m, &th, p, 1e-4);
        for (x, y) in pj.iter().zip(&fj) {
            for (u, v) in [(x.u, y.u), (x.du_dx, y.du_dx), (x.d2u_dx2, y.d2u_dx2)] {
                assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0), "{x:?} vs {y:?}");
            }
        }
    }
}
