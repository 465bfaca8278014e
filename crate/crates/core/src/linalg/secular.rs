use crate::error::{Error, Result};

/// `diag(d) + lam · u uᵀ` with `d` ascending and `lam ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneUpdate {
    pub d: Vec<f64>,
    pub u: Vec<f64>,
    pub lam: f64,
}

impl RankOneUpdate {
    pub fn new(d: Vec<f64>, u: Vec<f64>, lam: f64) -> Result<Self> {
        let r = RankOneUpdate { d, u, lam };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if self.d.is_empty() {
            return Err(Error::EmptyInput);
        }
        if self.u.len() != self.d.len() {
            return Err(Error::DimensionMismatch { expected: self.d.len(), got: self.u.len() });
        }
        if self.d.iter().chain(&self.u).any(|v| !v.is_finite()) || !self.lam.is_finite() {
            return Err(Error::NonFinite("rank-one update"));
        }
        if self.lam < 0.0 {
            return Err(Error::BadParam(format!("lam = {} must be nonnegative", self.lam)));
        }
        if self.d.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::BadInput("d must be ascending".into()));
        }
        Ok(())
    }
}

/// Eigenvalues of `diag(d) + lam · u uᵀ`, ascending, as the roots of the
/// secular equation `1 + lam Σ z_j² / (d_j − ω) = 0` after deflation.
///
/// Components with negligible weight keep their `d_i`; runs of equal `d_i`
/// are rotated so that only one member carries weight.
pub fn secular_rank_one_eigenvalues(r: &RankOneUpdate) -> Result<Vec<f64>> {
    r.validate()?;
    let n = r.d.len();
    let unorm2: f64 = r.u.iter().map(|x| x * x).sum();
    if r.lam == 0.0 || unorm2 == 0.0 {
        return Ok(r.d.clone());
    }
    let scale = r.d[0].abs().max(r.d[n - 1].abs()).max(r.lam * unorm2);
    let tol = 8.0 * f64::EPSILON * scale;

    let mut fixed = Vec::with_capacity(n);
    let mut poles: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && r.d[j] - r.d[i] <= tol {
            j += 1;
        }
        let w2: f64 = r.u[i..j].iter().map(|x| x * x).sum();
        fixed.extend(std::iter::repeat_n(r.d[i], j - i - 1));
        if r.lam * w2 <= tol * tol / scale.max(f64::MIN_POSITIVE) || r.lam * w2 == 0.0 {
            fixed.push(r.d[i]);
        } else {
            poles.push(r.d[i]);
            weights.push(r.lam * w2);
        }
        i = j;
    }

    let m = poles.len();
    let total: f64 = weights.iter().sum();
    let mut roots = Vec::with_capacity(n);
    for k in 0..m {
        let upper = if k + 1 < m { poles[k + 1] } else { poles[k] + total };
        let root = solve_interval(&poles, &weights, k, upper);
        if !(root >= poles[k] && root <= upper) {
            return Err(Error::BracketFailure { index: k });
        }
        roots.push(root);
    }

    let mut all = fixed;
    all.extend(roots);
    all.sort_by(f64::total_cmp);
    // Interlacing with the original diagonal.
    for (idx, w) in all.iter_mut().enumerate() {
        let lo = r.d[idx];
        let hi = if idx + 1 < n { r.d[idx + 1] } else { r.d[n - 1] + r.lam * unorm2 };
        if *w < lo - tol || *w > hi + tol {
            return Err(Error::BracketFailure { index: idx });
        }
        *w = w.clamp(lo, hi);
    }
    Ok(all)
}

/// Root of the secular function on `(poles[k], upper)`, computed in a
/// variable shifted to the nearer pole so that the small gap keeps full
/// relative accuracy.
fn solve_interval(poles: &[f64], weights: &[f64], k: usize, upper: f64) -> f64 {
    let lower = poles[k];
    let secular = |origin: f64, tau: f64| -> (f64, f64) {
        let mut f = 1.0;
        let mut df = 0.0;
        for (&p, &w) in poles.iter().zip(weights) {
            let gap = (p - origin) - tau;
            f += w / gap;
            df += w / (gap * gap);
        }
        (f, df)
    };

    let mid = 0.5 * (lower + upper);
    let (origin, mut lo, mut hi) = if k + 1 == poles.len() {
        (lower, 0.0, upper - lower)
    } else if secular(0.0, mid).0 >= 0.0 {
        (lower, 0.0, mid - lower)
    } else {
        (upper, mid - upper, 0.0)
    };

    let mut tau = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, df) = secular(origin, tau);
        if f == 0.0 {
            return origin + tau;
        }
        if f < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        if hi - lo <= 2.0 * f64::EPSILON * tau.abs().max(lo.abs()).max(hi.abs()) {
            break;
        }
        let newton = tau - f / df;
        tau = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    origin + tau
}
