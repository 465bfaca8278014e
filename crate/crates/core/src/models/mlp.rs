use super::Model;
use crate::linalg::dot;
use crate::problems::{Jet, Point};

/// Fully connected tanh network with a scalar linear output.
///
/// Every layer computes `W h / √fan_in + b`. Parameters are stored layer by
/// layer, `W` row-major followed by `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, seed: u64) -> Self {
        MlpConfig { input_dim, hidden, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub cfg: MlpConfig,
    widths: Vec<usize>,
    offsets: Vec<usize>,
    n_params: usize,
}

pub fn mlp(cfg: MlpConfig) -> crate::Result<Mlp> {
    if cfg.input_dim == 0 || cfg.input_dim > 2 || cfg.hidden.contains(&0) {
        return Err(crate::Error::BadParam(format!(
            "invalid network shape: input {} hidden {:?}",
            cfg.input_dim, cfg.hidden
        )));
    }
    let mut widths = vec![cfg.input_dim];
    widths.extend(&cfg.hidden);
    widths.push(1);
    let mut offsets = Vec::with_capacity(widths.len() - 1);
    let mut n = 0;
    for w in widths.windows(2) {
        offsets.push(n);
        n += w[0] * w[1] + w[1];
    }
    Ok(Mlp { cfg, widths, offsets, n_params: n })
}

/// Componentwise storage of a vector of jets.
#[derive(Debug, Clone, Default)]
pub(crate) struct Lanes {
    u: Vec<f64>,
    x: Vec<f64>,
    xx: Vec<f64>,
    t: Vec<f64>,
}

impl Lanes {
    fn zeros(n: usize) -> Self {
        Lanes { u: vec![0.0; n], x: vec![0.0; n], xx: vec![0.0; n], t: vec![0.0; n] }
    }

    fn from_jets(jets: &[Jet]) -> Self {
        Lanes {
            u: jets.iter().map(|j| j.u).collect(),
            x: jets.iter().map(|j| j.du_dx).collect(),
            xx: jets.iter().map(|j| j.d2u_dx2).collect(),
            t: jets.iter().map(|j| j.du_dt).collect(),
        }
    }

    fn jet(&self, i: usize) -> Jet {
        Jet::new(self.u[i], self.x[i], self.xx[i], self.t[i])
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Tape {
    inputs: Vec<Lanes>,
    pre: Vec<Lanes>,
}

struct Tanh {
    d1: f64,
    d2: f64,
    d3: f64,
}

fn tanh_derivs(s: f64) -> Tanh {
    let d1 = 1.0 - s * s;
    Tanh { d1, d2: -2.0 * s * d1, d3: -2.0 * d1 * d1 + 4.0 * s * s * d1 }
}

impl Mlp {
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Parameters drawn with the configured seed.
    pub fn init(&self) -> Vec<f64> {
        self.initial_params(self.cfg.seed)
    }

    fn layer<'a>(&self, theta: &'a [f64], l: usize) -> (&'a [f64], &'a [f64]) {
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        let o = self.offsets[l];
        (&theta[o..o + n_in * n_out], &theta[o + n_in * n_out..o + n_in * n_out + n_out])
    }

    fn coordinate_jets(&self, p: Point) -> Vec<Jet> {
        let mut v = vec![Jet::new(p.x, 1.0, 0.0, 0.0)];
        if self.cfg.input_dim == 2 {
            v.push(Jet::new(p.t, 0.0, 0.0, 1.0));
        }
        v
    }

    /// Forward pass from arbitrary input jets.
    pub(crate) fn forward(&self, theta: &[f64], input: &[Jet]) -> (Tape, Jet) {
        debug_assert_eq!(input.len(), self.cfg.input_dim);
        let n_layers = self.widths.len() - 1;
        let mut tape = Tape { inputs: Vec::with_capacity(n_layers), pre: Vec::with_capacity(n_layers - 1) };
        let mut h = Lanes::from_jets(input);
        for l in 0..n_layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let (w, b) = self.layer(theta, l);
            let sc = 1.0 / (n_in as f64).sqrt();
            let mut z = Lanes::zeros(n_out);
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                z.u[o] = sc * dot(row, &h.u) + b[o];
                z.x[o] = sc * dot(row, &h.x);
                z.xx[o] = sc * dot(row, &h.xx);
                z.t[o] = sc * dot(row, &h.t);
            }
            tape.inputs.push(h);
            if l + 1 == n_layers {
                return (tape, z.jet(0));
            }
            let mut a = Lanes::zeros(n_out);
            for o in 0..n_out {
                let s = z.u[o].tanh();
                let d = tanh_derivs(s);
                a.u[o] = s;
                a.x[o] = d.d1 * z.x[o];
                a.xx[o] = d.d2 * z.x[o] * z.x[o] + d.d1 * z.xx[o];
                a.t[o] = d.d1 * z.t[o];
            }
            tape.pre.push(z);
            h = a;
        }
        unreachable!("network has an output layer")
    }

    /// Reverse sweep for the functional `c · jet(out)`: accumulates
    /// `scale · ∂/∂θ` into `grad` and returns the adjoints of the input jets.
    pub(crate) fn backward(&self, theta: &[f64], tape: &Tape, c: &Jet, scale: f64, grad: &mut [f64]) -> Vec<Jet> {
        let n_layers = self.widths.len() - 1;
        let mut zb = Lanes::from_jets(&[*c * scale]);
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let (w, _) = self.layer(theta, l);
            let sc = 1.0 / (n_in as f64).sqrt();
            let h = &tape.inputs[l];
            let o0 = self.offsets[l];
            let mut hb = Lanes::zeros(n_in);
            for o in 0..n_out {
                let (bu, bx, bxx, bt) = (zb.u[o], zb.x[o], zb.xx[o], zb.t[o]);
                let gw = &mut grad[o0 + o * n_in..o0 + (o + 1) * n_in];
                for j in 0..n_in {
                    gw[j] += sc * (bu * h.u[j] + bx * h.x[j] + bxx * h.xx[j] + bt * h.t[j]);
                }
                grad[o0 + n_in * n_out + o] += bu;
                let row = &w[o * n_in..(o + 1) * n_in];
                for j in 0..n_in {
                    let wj = sc * row[j];
                    hb.u[j] += wj * bu;
                    hb.x[j] += wj * bx;
                    hb.xx[j] += wj * bxx;
                    hb.t[j] += wj * bt;
                }
            }
            if l == 0 {
                return (0..n_in).map(|j| hb.jet(j)).collect();
            }
            let z = &tape.pre[l - 1];
            let mut next = Lanes::zeros(n_in);
            for j in 0..n_in {
                let s = h.u[j];
                let d = tanh_derivs(s);
                let (zx, zxx, zt) = (z.x[j], z.xx[j], z.t[j]);
                next.xx[j] = hb.xx[j] * d.d1;
                next.x[j] = hb.x[j] * d.d1 + 2.0 * hb.xx[j] * d.d2 * zx;
                next.t[j] = hb.t[j] * d.d1;
                next.u[j] = hb.u[j] * d.d1
                    + hb.x[j] * d.d2 * zx
                    + hb.xx[j] * (d.d3 * zx * zx + d.d2 * zxx)
                    + hb.t[j] * d.d2 * zt;
            }
            zb = next;
        }
        unreachable!("loop returns at the input layer")
    }
}

impl Model for Mlp {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn input_dim(&self) -> usize {
        self.cfg.input_dim
    }

    fn is_linear(&self) -> bool {
        false
    }

    fn kind(&self) -> &'static str {
        "mlp"
    }

    fn eval_jet(&self, theta: &[f64], p: Point) -> Jet {
        self.forward(theta, &self.coordinate_jets(p)).1
    }

    fn param_jets(&self, theta: &[f64], p: Point) -> Vec<Jet> {
        let (tape, _) = self.forward(theta, &self.coordinate_jets(p));
        let unit = [
            Jet::new(1.0, 0.0, 0.0, 0.0),
            Jet::new(0.0, 1.0, 0.0, 0.0),
            Jet::new(0.0, 0.0, 1.0, 0.0),
            Jet::new(0.0, 0.0, 0.0, 1.0),
        ];
        let lanes: Vec<Vec<f64>> = unit
            .iter()
            .map(|c| {
                let mut g = vec![0.0; self.n_params];
                self.backward(theta, &tape, c, 1.0, &mut g);
                g
            })
            .collect();
        (0..self.n_params).map(|i| Jet::new(lanes[0][i], lanes[1][i], lanes[2][i], lanes[3][i])).collect()
    }

    fn accumulate_functional_grad(&self, theta: &[f64], p: Point, c: &Jet, scale: f64, out: &mut [f64]) {
        let (tape, _) = self.forward(theta, &self.coordinate_jets(p));
        self.backward(theta, &tape, c, scale, out);
    }
}
