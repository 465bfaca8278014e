//! PDE instances, jets and quadrature grids.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Sub};

use crate::error::{Error, Result};

/// A point in space (1D problems) or space-time (advection). `t` is zero
/// for 1D problems.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub t: f64,
}

impl Point {
    pub fn x(x: f64) -> Self {
        Point { x, t: 0.0 }
    }

    pub fn xt(x: f64, t: f64) -> Self {
        Point { x, t }
    }
}

/// Value and the coordinate derivatives needed by every operator in scope.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub u: f64,
    pub du_dx: f64,
    pub d2u_dx2: f64,
    pub du_dt: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet { u: 0.0, du_dx: 0.0, d2u_dx2: 0.0, du_dt: 0.0 };
    /// Coefficients picking out the value.
    pub const VALUE: Jet = Jet { u: 1.0, du_dx: 0.0, d2u_dx2: 0.0, du_dt: 0.0 };
    /// Coefficients picking out the first spatial derivative.
    pub const SLOPE: Jet = Jet { u: 0.0, du_dx: 1.0, d2u_dx2: 0.0, du_dt: 0.0 };

    pub fn new(u: f64, du_dx: f64, d2u_dx2: f64, du_dt: f64) -> Self {
        Jet { u, du_dx, d2u_dx2, du_dt }
    }

    /// Jet of a constant.
    pub fn constant(c: f64) -> Self {
        Jet { u: c, ..Jet::ZERO }
    }

    /// Pairing with a coefficient jet: `c.u·u + c.du_dx·u_x + …`.
    pub fn contract(&self, c: &Jet) -> f64 {
        c.u * self.u + c.du_dx * self.du_dx + c.d2u_dx2 * self.d2u_dx2 + c.du_dt * self.du_dt
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.du_dx.is_finite() && self.d2u_dx2.is_finite() && self.du_dt.is_finite()
    }

    /// Product rule, `self · other`.
    pub fn product(&self, o: &Jet) -> Jet {
        Jet {
            u: self.u * o.u,
            du_dx: self.du_dx * o.u + self.u * o.du_dx,
            d2u_dx2: self.d2u_dx2 * o.u + 2.0 * self.du_dx * o.du_dx + self.u * o.d2u_dx2,
            du_dt: self.du_dt * o.u + self.u * o.du_dt,
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.u + o.u, self.du_dx + o.du_dx, self.d2u_dx2 + o.d2u_dx2, self.du_dt + o.du_dt)
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.u - o.u, self.du_dx - o.du_dx, self.d2u_dx2 - o.d2u_dx2, self.du_dt - o.du_dt)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        Jet::new(self.u * c, self.du_dx * c, self.d2u_dx2 * c, self.du_dt * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Poisson,
    Helmholtz,
    Advection,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Poisson => "poisson",
            ProblemKind::Helmholtz => "helmholtz",
            ProblemKind::Advection => "advection",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(ProblemKind::Poisson),
            "helmholtz" => Ok(ProblemKind::Helmholtz),
            "advection" => Ok(ProblemKind::Advection),
            other => Err(Error::BadParam(format!("unknown problem kind '{other}'"))),
        }
    }
}

/// A linear PDE instance. The scalar `param` is `k` for Poisson, `ω` for
/// Helmholtz and `β` for advection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub param: f64,
}

/// Builds a problem instance.
pub fn make_problem(kind: ProblemKind, param: f64) -> Result<ProblemSpec> {
    if !param.is_finite() {
        return Err(Error::BadParam(format!("{} parameter must be finite", kind.name())));
    }
    if kind == ProblemKind::Advection && param <= 0.0 {
        return Err(Error::BadParam(format!("advection speed beta = {param} must be positive")));
    }
    Ok(ProblemSpec { kind, param })
}

impl ProblemSpec {
    /// Spatial (and temporal) dimension of the domain.
    pub fn input_dim(&self) -> usize {
        match self.kind {
            ProblemKind::Advection => 2,
            _ => 1,
        }
    }

    /// `(x_lo, x_hi, t_lo, t_hi)`; the time interval is empty for 1D.
    pub fn domain(&self) -> (f64, f64, f64, f64) {
        match self.kind {
            ProblemKind::Advection => (0.0, 2.0 * PI, 0.0, 1.0),
            _ => (-PI, PI, 0.0, 0.0),
        }
    }

    /// The operator is linear in the jet; these are its coefficients.
    pub fn operator_coeffs(&self) -> Jet {
        match self.kind {
            ProblemKind::Poisson => Jet::new(0.0, 0.0, 1.0, 0.0),
            ProblemKind::Helmholtz => Jet::new(self.param * self.param, 0.0, 1.0, 0.0),
            ProblemKind::Advection => Jet::new(0.0, self.param, 0.0, 1.0),
        }
    }

    pub fn operator(&self, jet: &Jet) -> f64 {
        jet.contract(&self.operator_coeffs())
    }

    pub fn forcing(&self, p: Point) -> f64 {
        match self.kind {
            ProblemKind::Poisson => -self.param * self.param * (self.param * p.x).sin(),
            _ => 0.0,
        }
    }

    pub fn exact(&self, p: Point) -> f64 {
        self.exact_jet(p).u
    }

    pub fn exact_jet(&self, p: Point) -> Jet {
        let a = self.param;
        match self.kind {
            ProblemKind::Poisson => {
                let (s, c) = (a * p.x).sin_cos();
                Jet::new(s, a * c, -a * a * s, 0.0)
            }
            ProblemKind::Helmholtz => {
                let (s, c) = (a * p.x).sin_cos();
                Jet::new(c, -a * s, -a * a * c, 0.0)
            }
            ProblemKind::Advection => {
                let (s, c) = (p.x - a * p.t).sin_cos();
                Jet::new(s, c, -s, -a * c)
            }
        }
    }
}

/// `operator(jet) − f(point)`.
pub fn residual_at(spec: &ProblemSpec, jet: &Jet, p: Point) -> f64 {
    spec.operator(jet) - spec.forcing(p)
}

/// A supervised boundary or initial condition: `Σ c_j · jet(u)(p_j) = target`,
/// penalised with `weight` (before the global λ).
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(Point, Jet)>,
    pub target: f64,
    pub weight: f64,
}

impl Constraint {
    pub fn dirichlet(p: Point, target: f64, weight: f64) -> Self {
        Constraint { terms: vec![(p, Jet::VALUE)], target, weight }
    }

    /// `u(a) − u(b) = 0`.
    pub fn periodic_pair(a: Point, b: Point, weight: f64) -> Self {
        Constraint { terms: vec![(a, Jet::VALUE), (b, Jet::VALUE * -1.0)], target: 0.0, weight }
    }
}

/// Interior quadrature plus the boundary/initial constraint set.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadGrid {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub boundary: Vec<Constraint>,
}

impl QuadGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn midpoints(lo: f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
    let h = (hi - lo) / n as f64;
    ((0..n).map(|i| lo + (i as f64 + 0.5) * h).collect(), h)
}

/// Equispaced cell-centred grid with weights equal to the cell measure.
///
/// Boundary sets: Poisson uses `u(±π) = g` with weight ½ each; Helmholtz
/// uses `u(0) = 1` and `u'(0) = 0` with unit weights; advection uses the
/// initial line `t = 0` (weight `2π/n_x` per node) and the periodic pairs
/// `u(0,t) = u(2π,t)` (weight `1/n_t` per pair). `n_t` is ignored in 1D.
pub fn make_grid(spec: &ProblemSpec, n_x: usize, n_t: usize) -> Result<QuadGrid> {
    if n_x < 2 {
        return Err(Error::BadGrid(format!("n_x = {n_x} must be at least 2")));
    }
    let (x0, x1, t0, t1) = spec.domain();
    let (xs, hx) = midpoints(x0, x1, n_x);
    match spec.kind {
        ProblemKind::Poisson | ProblemKind::Helmholtz => {
            let points = xs.iter().map(|&x| Point::x(x)).collect();
            let weights = vec![hx; n_x];
            let boundary = if spec.kind == ProblemKind::Poisson {
                [x0, x1]
                    .iter()
                    .map(|&x| Constraint::dirichlet(Point::x(x), spec.exact(Point::x(x)), 0.5))
                    .collect()
            } else {
                let origin = Point::x(0.0);
                let e = spec.exact_jet(origin);
                vec![
                    Constraint::dirichlet(origin, e.u, 1.0),
                    Constraint { terms: vec![(origin, Jet::SLOPE)], target: e.du_dx, weight: 1.0 },
                ]
            };
            Ok(QuadGrid { points, weights, boundary })
        }
        ProblemKind::Advection => {
            if n_t < 1 {
                return Err(Error::BadGrid(format!("n_t = {n_t} must be at least 1")));
            }
            let (ts, ht) = midpoints(t0, t1, n_t);
            let mut points = Vec::with_capacity(n_x * n_t);
            for &x in &xs {
                for &t in &ts {
                    points.push(Point::xt(x, t));
                }
            }
            let weights = vec![hx * ht; n_x * n_t];
            let mut boundary: Vec<Constraint> = xs
                .iter()
                .map(|&x| Constraint::dirichlet(Point::xt(x, t0), spec.exact(Point::xt(x, t0)), hx))
                .collect();
            boundary.extend(
                ts.iter().map(|&t| Constraint::periodic_pair(Point::xt(x0, t), Point::xt(x1, t), ht)),
            );
            Ok(QuadGrid { points, weights, boundary })
        }
    }
}
