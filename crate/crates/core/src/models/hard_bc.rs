use std::sync::Arc;

use super::{probe_points, Model, Subset};
use crate::error::{Error, Result};
use crate::problems::{Jet, Point};
use std::f64::consts::PI;

/// Smooth multiplier `η(x)` given by its jet.
#[derive(Clone)]
pub struct Eta {
    pub name: &'static str,
    f: Arc<dyn Fn(Point) -> Jet + Send + Sync>,
}

impl Eta {
    pub fn new(name: &'static str, f: impl Fn(Point) -> Jet + Send + Sync + 'static) -> Self {
        Eta { name, f: Arc::new(f) }
    }

    pub fn jet(&self, p: Point) -> Jet {
        (self.f)(p)
    }
}

impl std::fmt::Debug for Eta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Eta({})", self.name)
    }
}

/// `η(x) = sin x`, vanishing at `x = ±π`.
pub fn sin_eta() -> Eta {
    Eta::new("sin", |p| {
        let (s, c) = p.x.sin_cos();
        Jet::new(s, c, -s, 0.0)
    })
}

/// Drops the parameters whose wrapped feature jets vanish at every probe
/// point. Only meaningful for linear inner models.
fn inert_subset(n: usize, probes: &[Point], feature_jets: impl Fn(Point) -> Vec<Jet>) -> Subset {
    let jets: Vec<Vec<Jet>> = probes.iter().map(|&p| feature_jets(p)).collect();
    let mag = |j: &Jet| j.u.abs().max(j.du_dx.abs()).max(j.d2u_dx2.abs()).max(j.du_dt.abs());
    let scale = jets.iter().flatten().map(mag).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let keep = (0..n).filter(|&i| jets.iter().any(|row| mag(&row[i]) > 1e-12 * scale)).collect();
    Subset { keep, full: n }
}

/// `u(x, t) = v(x, t) − v(x, 0) + sin(a x)`, which matches the initial
/// condition `sin(a x)` for every parameter value.
#[derive(Debug)]
pub struct HardBcAdvection {
    pub inner: Box<dyn Model>,
    pub a: f64,
    subset: Subset,
}

fn initial_trace(j: Jet) -> Jet {
    Jet { du_dt: 0.0, ..j }
}

pub fn hard_bc_advection(inner: Box<dyn Model>, a: f64, drop_inert: bool) -> Result<HardBcAdvection> {
    if inner.input_dim() != 2 {
        return Err(Error::BadParam("hard initial condition needs a space-time model".into()));
    }
    let n = inner.n_params();
    let subset = if drop_inert && inner.is_linear() {
        let zeros = vec![0.0; n];
        inert_subset(n, &probe_points(2, (0.0, 2.0 * PI), (0.0, 1.0)), |p| {
            let at = inner.param_jets(&zeros, p);
            let base = inner.param_jets(&zeros, Point::xt(p.x, 0.0));
            at.iter().zip(&base).map(|(x, y)| *x - initial_trace(*y)).collect()
        })
    } else {
        Subset::all(n)
    };
    Ok(HardBcAdvection { inner, a, subset })
}

impl HardBcAdvection {
    /// Indices of the retained inner parameters.
    pub fn kept(&self) -> &[usize] {
        &self.subset.keep
    }

    fn offset(&self, p: Point) -> Jet {
        let (s, c) = (self.a * p.x).sin_cos();
        Jet::new(s, self.a * c, -self.a * self.a * s, 0.0)
    }
}

impl Model for HardBcAdvection {
    fn n_params(&self) -> usize {
        self.subset.len()
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn is_linear(&self) -> bool {
        self.inner.is_linear()
    }

    fn kind(&self) -> &'static str {
        "hard_bc_advection"
    }

    fn eval_jet(&self, theta: &[f64], p: Point) -> Jet {
        let full = self.subset.expand(theta);
        self.inner.eval_jet(&full, p) - initial_trace(self.inner.eval_jet(&full, Point::xt(p.x, 0.0))) + self.offset(p)
    }

    fn param_jets(&self, theta: &[f64], p: Point) -> Vec<Jet> {
        let full = self.subset.expand(theta);
        let at = self.inner.param_jets(&full, p);
        let base = self.inner.param_jets(&full, Point::xt(p.x, 0.0));
        let wrapped: Vec<Jet> = at.iter().zip(&base).map(|(x, y)| *x - initial_trace(*y)).collect();
        self.subset.select(&wrapped)
    }

    fn accumulate_functional_grad(&self, theta: &[f64], p: Point, c: &Jet, scale: f64, out: &mut [f64]) {
        let full = self.subset.expand(theta);
        let mut g = vec![0.0; self.subset.full];
        self.inner.accumulate_functional_grad(&full, p, c, scale, &mut g);
        self.inner.accumulate_functional_grad(&full, Point::xt(p.x, 0.0), &initial_trace(*c), -scale, &mut g);
        for (o, &k) in out.iter_mut().zip(&self.subset.keep) {
            *o += g[k];
        }
    }
}

/// `u(x) = η(x) · v(x)`.
#[derive(Debug)]
pub struct Multiplicative1D {
    pub inner: Box<dyn Model>,
    pub eta: Eta,
}

pub fn hard_bc_multiplicative_1d(inner: Box<dyn Model>, eta: Eta) -> Result<Multiplicative1D> {
    if inner.input_dim() != 1 {
        return Err(Error::BadParam("multiplicative wrapper needs a 1D model".into()));
    }
    Ok(Multiplicative1D { inner, eta })
}

impl Model for Multiplicative1D {
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn is_linear(&self) -> bool {
        self.inner.is_linear()
    }

    fn kind(&self) -> &'static str {
        "hard_bc_multiplicative"
    }

    fn eval_jet(&self, theta: &[f64], p: Point) -> Jet {
        self.eta.jet(p).product(&self.inner.eval_jet(theta, p))
    }

    fn param_jets(&self, theta: &[f64], p: Point) -> Vec<Jet> {
        let e = self.eta.jet(p);
        self.inner.param_jets(theta, p).iter().map(|j| e.product(j)).collect()
    }

    fn accumulate_functional_grad(&self, theta: &[f64], p: Point, c: &Jet, scale: f64, out: &mut [f64]) {
        // c · (η v) = c' · v
        let e = self.eta.jet(p);
        let adj = Jet::new(
            c.u * e.u + c.du_dx * e.du_dx + c.d2u_dx2 * e.d2u_dx2 + c.du_dt * e.du_dt,
            c.du_dx * e.u + 2.0 * c.d2u_dx2 * e.du_dx,
            c.d2u_dx2 * e.u,
            c.du_dt * e.u,
        );
        self.inner.accumulate_functional_grad(theta, p, &adj, scale, out);
    }
}

/// `u(x) = v(x) − v(π)`.
#[derive(Debug)]
pub struct Subtractive1D {
    pub inner: Box<dyn Model>,
    anchor: Point,
    subset: Subset,
}

pub fn hard_bc_subtractive_1d(inner: Box<dyn Model>, drop_inert: bool) -> Result<Subtractive1D> {
    if inner.input_dim() != 1 {
        return Err(Error::BadParam("subtractive wrapper needs a 1D model".into()));
    }
    let anchor = Point::x(PI);
    let n = inner.n_params();
    let subset = if drop_inert && inner.is_linear() {
        let zeros = vec![0.0; n];
        let base = inner.param_jets(&zeros, anchor);
        inert_subset(n, &probe_points(1, (-PI, PI), (0.0, 0.0)), |p| {
            inner.param_jets(&zeros, p).iter().zip(&base).map(|(x, y)| *x - Jet::constant(y.u)).collect()
        })
    } else {
        Subset::all(n)
    };
    Ok(Subtractive1D { inner, anchor, subset })
}

impl Subtractive1D {
    pub fn kept(&self) -> &[usize] {
        &self.subset.keep
    }
}

impl Model for Subtractive1D {
    fn n_params(&self) -> usize {
        self.subset.len()
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn is_linear(&self) -> bool {
        self.inner.is_linear()
    }

    fn kind(&self) -> &'static str {
        "hard_bc_subtractive"
    }

    fn eval_jet(&self, theta: &[f64], p: Point) -> Jet {
        let full = self.subset.expand(theta);
        self.inner.eval_jet(&full, p) - Jet::constant(self.inner.eval_jet(&full, self.anchor).u)
    }

    fn param_jets(&self, theta: &[f64], p: Point) -> Vec<Jet> {
        let full = self.subset.expand(theta);
        let base = self.inner.param_jets(&full, self.anchor);
        let wrapped: Vec<Jet> =
            self.inner.param_jets(&full, p).iter().zip(&base).map(|(x, y)| *x - Jet::constant(y.u)).collect();
        self.subset.select(&wrapped)
    }

    fn accumulate_functional_grad(&self, theta: &[f64], p: Point, c: &Jet, scale: f64, out: &mut [f64]) {
        let full = self.subset.expand(theta);
        let mut g = vec![0.0; self.subset.full];
        self.inner.accumulate_functional_grad(&full, p, c, scale, &mut g);
        self.inner.accumulate_functional_grad(&full, self.anchor, &Jet::VALUE, -scale * c.u, &mut g);
        for (o, &k) in out.iter_mut().zip(&self.subset.keep) {
            *o += g[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        fd_eval_jet, fd_param_jets, fourier1d, fourier2d, mlp, Basis2D, Fourier1DConfig, Fourier2DConfig,
        MlpConfig, Normalization,
    };
    use crate::problems::{make_problem, ProblemKind};

    fn toy() -> Box<dyn Model> {
        Box::new(fourier1d(Fourier1DConfig { k_max: 1, normalization: Normalization::Unit }))
    }

    #[test]
    fn initial_condition_holds_for_any_theta() {
        let inner = fourier2d(Fourier2DConfig::new(2, 3));
        let m = hard_bc_advection(Box::new(inner), 1.0, false).unwrap();
        let th = m.initial_params(7);
        for i in 0..1000 {
            let x = 2.0 * PI * ((i as f64 * 0.618_033_988_7).fract());
            let u = m.eval_jet(&th, Point::xt(x, 0.0)).u;
            assert!((u - x.sin()).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_theta_residual_is_offset_transport() {
        let beta = 3.0;
        let a = 2.0;
        let m = hard_bc_advection(Box::new(fourier2d(Fourier2DConfig::new(1, 1))), a, true).unwrap();
        let spec = make_problem(ProblemKind::Advection, beta).unwrap();
        let p = Point::xt(0.8, 0.4);
        let r = spec.operator(&m.eval_jet(&vec![0.0; m.n_params()], p));
        assert!((r - beta * a * (a * p.x).cos()).abs() < 1e-13);
    }

    #[test]
    fn inert_temporal_constants_are_dropped() {
        let inner = fourier2d(Fourier2DConfig { basis: Basis2D::Hartley, ..Fourier2DConfig::new(2, 2) });
        let m = hard_bc_advection(Box::new(inner.clone()), 1.0, true).unwrap();
        assert_eq!(m.n_params(), 5 * 4);
        assert!(m.kept().iter().all(|&i| inner.mode(i).1 != 0));
    }

    #[test]
    fn subtractive_drops_constant() {
        let m = hard_bc_subtractive_1d(toy(), true).unwrap();
        assert_eq!(m.kept(), &[0, 2]);
        let th = [0.3, -0.7];
        assert!(m.eval_jet(&th, Point::x(PI)).u.abs() < 1e-15);
    }

    #[test]
    fn multiplicative_vanishes_on_boundary() {
        let m = hard_bc_multiplicative_1d(toy(), sin_eta()).unwrap();
        for x in [-PI, PI] {
            assert!(m.eval_jet(&[1.0, 2.0, 3.0], Point::x(x)).u.abs() < 1e-14);
        }
    }

    #[test]
    fn wrapper_jets_match_finite_differences() {
        let net = || Box::new(mlp(MlpConfig::new(1, vec![4], 2)).unwrap()) as Box<dyn Model>;
        let net2 = Box::new(mlp(MlpConfig::new(2, vec![4], 2)).unwrap()) as Box<dyn Model>;
        let models: Vec<Box<dyn Model>> = vec![
            Box::new(hard_bc_multiplicative_1d(net(), sin_eta()).unwrap()),
            Box::new(hard_bc_subtractive_1d(net(), true).unwrap()),
            Box::new(hard_bc_advection(net2, 1.0, true).unwrap()),
        ];
        for m in &models {
            let th = m.initial_params(1);
            let p = Point::xt(0.6, if m.input_dim() == 2 { 0.3 } else { 0.0 });
            let a = m.eval_jet(&th, p);
            let f = fd_eval_jet(m.as_ref(), &th, p, 1e-3);
            for (u, v) in [(a.du_dx, f.du_dx), (a.d2u_dx2, f.d2u_dx2), (a.du_dt, f.du_dt)] {
                assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0), "{}: {u} vs {v}", m.kind());
            }
            let pj = m.param_jets(&th, p);
            let fj = fd_param_jets(m.as_ref(), &th, p, 1e-4);
            let c = Jet::new(0.5, -0.3, 1.2, 0.7);
            let g = m.param_grad_functional(&th, p, &c);
            for ((x, y), gi) in pj.iter().zip(&fj).zip(&g) {
                for (u, v) in [(x.u, y.u), (x.du_dx, y.du_dx), (x.d2u_dx2, y.d2u_dx2), (x.du_dt, y.du_dt)] {
                    assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0), "{}: {x:?} vs {y:?}", m.kind());
                }
                assert!((x.contract(&c) - gi).abs() < 1e-12);
            }
        }
    }
}
