//! Parametric ansatz families exposing value jets and per-parameter jets.

mod ff_mlp;
mod fourier;
mod hard_bc;
mod mlp;

pub use ff_mlp::{ff_mlp, AlphaRule, FfMlp};
pub use fourier::{
    fourier1d, fourier2d, Basis2D, Fourier1D, Fourier1DConfig, Fourier2D, Fourier2DConfig,
    Normalization,
};
pub use hard_bc::{
    hard_bc_advection, hard_bc_multiplicative_1d, hard_bc_subtractive_1d, sin_eta, Eta,
    HardBcAdvection, Multiplicative1D, Subtractive1D,
};
pub use mlp::{mlp, Mlp, MlpConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::problems::{Jet, Point};

/// A differentiable ansatz `u(x; θ)`.
///
/// `param_jets(θ, p)[i]` is the jet of `∂u/∂θ_i` at `p`. The gradient of a
/// linear functional `c · jet(u)(p)` with respect to `θ` is the hot path for
/// assembly and training, so it is exposed separately.
pub trait Model: Send + Sync + std::fmt::Debug {
    fn n_params(&self) -> usize;

    fn input_dim(&self) -> usize;

    /// `true` when `u` is affine in `θ`.
    fn is_linear(&self) -> bool;

    fn kind(&self) -> &'static str;

    fn eval_jet(&self, theta: &[f64], p: Point) -> Jet;

    fn param_jets(&self, theta: &[f64], p: Point) -> Vec<Jet>;

    /// `out += scale · ∇_θ (c · jet(u_θ)(p))`.
    fn accumulate_functional_grad(&self, theta: &[f64], p: Point, c: &Jet, scale: f64, out: &mut [f64]) {
        for (o, j) in out.iter_mut().zip(self.param_jets(theta, p)) {
            *o += scale * j.contract(c);
        }
    }

    fn param_grad_functional(&self, theta: &[f64], p: Point, c: &Jet) -> Vec<f64> {
        let mut out = vec![0.0; self.n_params()];
        self.accumulate_functional_grad(theta, p, c, 1.0, &mut out);
        out
    }

    /// Initial parameters; i.i.d. standard normal unless the model has its
    /// own scheme.
    fn initial_params(&self, seed: u64) -> Vec<f64> {
        standard_normal(self.n_params(), seed)
    }
}

pub fn standard_normal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn n_params(&self) -> usize {
        (**self).n_params()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn is_linear(&self) -> bool {
        (**self).is_linear()
    }
    fn kind(&self) -> &'static str {
        (**self).kind()
    }
    fn eval_jet(&self, theta: &[f64], p: Point) -> Jet {
        (**self).eval_jet(theta, p)
    }
    fn param_jets(&self, theta: &[f64], p: Point) -> Vec<Jet> {
        (**self).param_jets(theta, p)
    }
    fn accumulate_functional_grad(&self, theta: &[f64], p: Point, c: &Jet, scale: f64, out: &mut [f64]) {
        (**self).accumulate_functional_grad(theta, p, c, scale, out)
    }
    fn initial_params(&self, seed: u64) -> Vec<f64> {
        (**self).initial_params(seed)
    }
}

/// Jet of `u` by central differences in `x` and `t` (fourth order). Used as
/// a test oracle for the analytic jets.
pub fn fd_eval_jet(model: &dyn Model, theta: &[f64], p: Point, h: f64) -> Jet {
    let f = |x: f64, t: f64| model.eval_jet(theta, Point::xt(x, t)).u;
    let (x, t) = (p.x, p.t);
    let d1 = |g: &dyn Fn(f64) -> f64, s: f64| {
        (-g(s + 2.0 * h) + 8.0 * g(s + h) - 8.0 * g(s - h) + g(s - 2.0 * h)) / (12.0 * h)
    };
    let fx = |s: f64| f(s, t);
    let ft = |s: f64| f(x, s);
    let dxx = (-fx(x + 2.0 * h) + 16.0 * fx(x + h) - 30.0 * fx(x) + 16.0 * fx(x - h) - fx(x - 2.0 * h))
        / (12.0 * h * h);
    let dt = if model.input_dim() == 2 { d1(&ft, t) } else { 0.0 };
    Jet::new(f(x, t), d1(&fx, x), dxx, dt)
}

/// Parameter jets by central differences in `θ` (fourth order).
pub fn fd_param_jets(model: &dyn Model, theta: &[f64], p: Point, h: f64) -> Vec<Jet> {
    let mut th = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let mut at = |d: f64| {
                th[i] = theta[i] + d;
                let j = model.eval_jet(&th, p);
                th[i] = theta[i];
                j
            };
            let (p2, p1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
            (m2 - p2 + (p1 - m1) * 8.0) * (1.0 / (12.0 * h))
        })
        .collect()
}

/// Dense-parameter subset bookkeeping for wrappers that drop inert
/// parameters of a linear inner model.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Subset {
    pub keep: Vec<usize>,
    pub full: usize,
}

impl Subset {
    pub fn all(n: usize) -> Self {
        Subset { keep: (0..n).collect(), full: n }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn expand(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.full];
        for (&k, &v) in self.keep.iter().zip(theta) {
            out[k] = v;
        }
        out
    }

    pub fn select<T: Copy>(&self, full: &[T]) -> Vec<T> {
        self.keep.iter().map(|&k| full[k]).collect()
    }
}

/// Deterministic probe points spread over a box, for detecting features that
/// vanish identically.
pub(crate) fn probe_points(dim: usize, x: (f64, f64), t: (f64, f64)) -> Vec<Point> {
    let golden = 0.618_033_988_749_894_9;
    let plastic = 0.754_877_666_246_692_7;
    (0..24)
        .map(|i| {
            let a = ((i as f64 + 0.5) * golden).fract();
            let b = ((i as f64 + 0.5) * plastic).fract();
            let px = x.0 + a * (x.1 - x.0);
            let pt = if dim == 2 { t.0 + b * (t.1 - t.0) } else { 0.0 };
            Point::xt(px, pt)
        })
        .collect()
}
