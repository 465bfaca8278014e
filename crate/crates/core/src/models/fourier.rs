use std::f64::consts::PI;

use super::Model;
use crate::problems::{Jet, Point};

/// Scaling of the 1D trigonometric basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `1/√(2π)` for the constant, `1/√π` otherwise; orthonormal on `(−π, π)`.
    #[default]
    Orthonormal,
    /// Plain `{cos kx, 1, sin kx}`.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fourier1DConfig {
    pub k_max: usize,
    pub normalization: Normalization,
}

impl Fourier1DConfig {
    pub fn new(k_max: usize) -> Self {
        Fourier1DConfig { k_max, normalization: Normalization::Orthonormal }
    }
}

/// `u(x) = Σ_k θ_k φ_k(x)`, indices `−K..=K` mapping to
/// `cos Kx, …, cos x, 1, sin x, …, sin Kx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fourier1D {
    pub cfg: Fourier1DConfig,
}

pub fn fourier1d(cfg: Fourier1DConfig) -> Fourier1D {
    Fourier1D { cfg }
}

impl Fourier1D {
    /// Signed frequency of parameter `i`.
    pub fn frequency(&self, i: usize) -> i64 {
        i as i64 - self.cfg.k_max as i64
    }

    pub fn frequencies(&self) -> Vec<i64> {
        (0..self.n_params()).map(|i| self.frequency(i)).collect()
    }

    fn scale(&self, k: i64) -> f64 {
        match (self.cfg.normalization, k) {
            (Normalization::Unit, _) => 1.0,
            (Normalization::Orthonormal, 0) => 1.0 / (2.0 * PI).sqrt(),
            (Normalization::Orthonormal, _) => 1.0 / PI.sqrt(),
        }
    }

    pub fn feature(&self, i: usize, x: f64) -> Jet {
        let k = self.frequency(i);
        let c = self.scale(k);
        let kf = k.unsigned_abs() as f64;
        let (s, co) = (kf * x).sin_cos();
        match k {
            0 => Jet::constant(c),
            k if k < 0 => Jet::new(c * co, -c * kf * s, -c * kf * kf * co, 0.0),
            _ => Jet::new(c * s, c * kf * co, -c * kf * kf * s, 0.0),
        }
    }
}

impl Model for Fourier1D {
    fn n_params(&self) -> usize {
        2 * self.cfg.k_max + 1
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn kind(&self) -> &'static str {
        "fourier1d"
    }

    fn eval_jet(&self, theta: &[f64], p: Point) -> Jet {
        let mut out = Jet::ZERO;
        for (i, &th) in theta.iter().enumerate() {
            out += self.feature(i, p.x) * th;
        }
        out
    }

    fn param_jets(&self, _theta: &[f64], p: Point) -> Vec<Jet> {
        (0..self.n_params()).map(|i| self.feature(i, p.x)).collect()
    }
}

/// Space-time trigonometric basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Basis2D {
    /// `cos(kx + ω_t m t)` and `sin(kx + ω_t m t)` for `k ∈ [−Kx, Kx]`,
    /// `m ∈ [0, Kt]`; parameter index `((k+Kx)(Kt+1) + m)·2 + slot`.
    #[default]
    CosSin,
    /// `cas(k₁x + ω_t k₂ t)` with `cas = cos + sin`, `k₁ ∈ [−Kx, Kx]`,
    /// `k₂ ∈ [−Kt, Kt]`; parameter index `(k₁+Kx)(2Kt+1) + (k₂+Kt)`.
    Hartley,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fourier2DConfig {
    pub kx: usize,
    pub kt: usize,
    pub omega_t: f64,
    pub basis: Basis2D,
}

impl Fourier2DConfig {
    pub fn new(kx: usize, kt: usize) -> Self {
        Fourier2DConfig { kx, kt, omega_t: 2.0 * PI, basis: Basis2D::CosSin }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fourier2D {
    pub cfg: Fourier2DConfig,
}

pub fn fourier2d(cfg: Fourier2DConfig) -> Fourier2D {
    Fourier2D { cfg }
}

const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

impl Fourier2D {
    /// `(k, m)` frequency pair of parameter `i`: spatial then temporal index.
    pub fn mode(&self, i: usize) -> (i64, i64) {
        let (kx, kt) = (self.cfg.kx as i64, self.cfg.kt as i64);
        match self.cfg.basis {
            Basis2D::CosSin => {
                let pair = (i / 2) as i64;
                (pair / (kt + 1) - kx, pair % (kt + 1))
            }
            Basis2D::Hartley => {
                let i = i as i64;
                (i / (2 * kt + 1) - kx, i % (2 * kt + 1) - kt)
            }
        }
    }

    pub fn modes(&self) -> Vec<(i64, i64)> {
        (0..self.n_params()).map(|i| self.mode(i)).collect()
    }

    pub fn feature(&self, i: usize, p: Point) -> Jet {
        let (k, m) = self.mode(i);
        let (k, wm) = (k as f64, self.cfg.omega_t * m as f64);
        let (s, c) = (k * p.x + wm * p.t).sin_cos();
        let n = INV_SQRT_PI;
        // Value and phase derivative of the basis profile.
        let (v, dv) = match self.cfg.basis {
            Basis2D::CosSin if i.is_multiple_of(2) => (c, -s),
            Basis2D::CosSin => (s, c),
            Basis2D::Hartley => (c + s, c - s),
        };
        Jet::new(n * v, n * k * dv, -n * k * k * v, n * wm * dv)
    }
}

impl Model for Fourier2D {
    fn n_params(&self) -> usize {
        let (kx, kt) = (self.cfg.kx, self.cfg.kt);
        match self.cfg.basis {
            Basis2D::CosSin => 2 * (2 * kx + 1) * (kt + 1),
            Basis2D::Hartley => (2 * kx + 1) * (2 * kt + 1),
        }
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn kind(&self) -> &'static str {
        "fourier2d"
    }

    fn eval_jet(&self, theta: &[f64], p: Point) -> Jet {
        let mut out = Jet::ZERO;
        for (i, &th) in theta.iter().enumerate() {
            out += self.feature(i, p) * th;
        }
        out
    }

    fn param_jets(&self, _theta: &[f64], p: Point) -> Vec<Jet> {
        (0..self.n_params()).map(|i| self.feature(i, p)).collect()
    }
}
