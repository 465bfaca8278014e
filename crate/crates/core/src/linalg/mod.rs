//! Dense real linear algebra used throughout the crate.
//!
//! Matrices are small to medium sized (at most a few thousand rows) and
//! stored row-major in a flat `Vec<f64>`. Symmetric matrices get their own
//! type so that symmetry is established once, at construction.

mod eigen;
mod secular;
mod solve;

pub use eigen::{
    condition_number, condition_number_of_spectrum, eigenvalues, eigh, jacobi_eigh,
    range_condition_number, EigenDecomposition, JACOBI_SWEEP_BUDGET,
};
pub use secular::{secular_rank_one_eigenvalues, RankOneUpdate};
pub use solve::solve_ridge_least_squares;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// General dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: x.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, got: x.len() });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dense symmetric matrix. Symmetry is exact: construction averages the
/// two triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from a square matrix, replacing `a_ij` and `a_ji` by their mean.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch { expected: m.rows, got: m.cols });
        }
        if m.rows == 0 {
            return Err(Error::EmptyInput);
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("symmetric matrix entries"));
        }
        let n = m.rows;
        let mut data = m.data.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m.get(i, j) + m.get(j, i));
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_matrix(&Matrix::from_fn(n, n, f))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
        }
        Self::from_fn(n, |i, j| rows[i][j])
    }

    pub fn identity(n: usize) -> Self {
        Self { n, data: Matrix::identity(n).data }
    }

    pub fn from_diag(d: &[f64]) -> Result<Self> {
        Self::from_matrix(&Matrix::from_diag(d))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix { rows: self.n, cols: self.n, data: self.data.clone() }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix { n: self.n, data: self.data.iter().map(|v| v * c).collect() }
    }

    /// `self + c * other`
    pub fn add_scaled(&self, other: &SymMatrix, c: f64) -> Result<SymMatrix> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + c * b).collect();
        Ok(SymMatrix { n: self.n, data })
    }

    /// `self + c * I`
    pub fn shifted(&self, c: f64) -> SymMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            out.data[i * self.n + i] += c;
        }
        out
    }

    /// `self + c * v vᵀ`
    pub fn rank_one_update(&self, v: &[f64], c: f64) -> Result<SymMatrix> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.len() });
        }
        let n = self.n;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] += c * (v[i] * v[j]);
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok((0..self.n).map(|i| dot(self.row(i), x)).collect())
    }

    /// `D S D` for a diagonal `D = diag(p)`.
    pub fn congruence_diag(&self, p: &[f64]) -> Result<SymMatrix> {
        if p.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: p.len() });
        }
        let n = self.n;
        let mut data = self.data.clone();
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] *= p[i] * p[j];
            }
        }
        Ok(SymMatrix { n, data })
    }

    /// `Pᵀ S P` for a general square `P`.
    pub fn congruence(&self, p: &Matrix) -> Result<SymMatrix> {
        if p.rows() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: p.rows() });
        }
        let sp = self.to_matrix().matmul(p)?;
        let out = p.transpose().matmul(&sp)?;
        SymMatrix::from_matrix(&out)
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn submatrix(&self, keep: &[usize]) -> Result<SymMatrix> {
        SymMatrix::from_fn(keep.len(), |i, j| self.get(keep[i], keep[j]))
    }
}

/// Dot product with four interleaved accumulators. The summation order is
/// fixed, so results do not depend on how callers split work across threads.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `JᵀJ` for a row-major `J` (rows are samples). Rows of the result are
/// computed independently in parallel; each entry is a fixed-order dot
/// product, so the output is identical for any thread count.
pub fn gram_columns(j: &Matrix) -> Result<SymMatrix> {
    let n = j.cols();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let jt = j.transpose();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            let ca = jt.row(a);
            (0..n).map(|b| if b < a { 0.0 } else { dot(ca, jt.row(b)) }).collect()
        })
        .collect();
    SymMatrix::from_fn(n, |a, b| if a <= b { rows[a][b] } else { rows[b][a] })
}

/// `JJᵀ` (Gram matrix of the rows).
pub fn gram_rows(j: &Matrix) -> Result<SymMatrix> {
    let m = j.rows();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|a| (0..m).map(|b| if b < a { 0.0 } else { dot(j.row(a), j.row(b)) }).collect())
        .collect();
    SymMatrix::from_fn(m, |a, b| if a <= b { rows[a][b] } else { rows[b][a] })
}

/// Spectrum of `JᵀJ` computed through whichever of `JᵀJ` and `JJᵀ` is
/// smaller; the missing eigenvalues are exact zeros. Returned ascending,
/// length `J.cols()`.
pub fn gram_spectrum(j: &Matrix) -> Result<Vec<f64>> {
    let n = j.cols();
    let mut eigs = if j.rows() < n {
        let mut e = eigenvalues(&gram_rows(j)?)?;
        e.resize(n, 0.0);
        e
    } else {
        eigenvalues(&gram_columns(j)?)?
    };
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

/// Kronecker product: `out[i*rb + j][k*cb + l] = a[i][k] * b[j][l]`.
pub fn kron(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("kron operand"));
    }
    let (ra, ca, rb, cb) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = Matrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for k in 0..ca {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            for j in 0..rb {
                for l in 0..cb {
                    out.set(i * rb + j, k * cb + l, aik * b.get(j, l));
                }
            }
        }
    }
    Ok(out)
}

/// Equal-width histogram of a spectrum after normalising by its largest
/// eigenvalue (i.e. multiplying by the step size `1/λ_max`).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn spectral_histogram(eigs: &[f64], bins: usize) -> Result<Histogram> {
    if eigs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bins == 0 {
        return Err(Error::BadInput("histogram needs at least one bin".into()));
    }
    if eigs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectrum"));
    }
    let top = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = if top > 0.0 { top } else { eigs.iter().fold(0.0, |m: f64, v| m.max(v.abs())) };
    let normed: Vec<f64> =
        if scale > 0.0 { eigs.iter().map(|v| v / scale).collect() } else { eigs.to_vec() };
    let lo = normed.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = normed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0usize; bins];
    for v in normed {
        let idx = if width > 0.0 { (((v - lo) / width).floor() as usize).min(bins - 1) } else { 0 };
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrizes_by_averaging() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 4.0, 3.0]).unwrap();
        let s = SymMatrix::from_matrix(&m).unwrap();
        assert_eq!(s.get(0, 1), 3.0);
        assert_eq!(s.get(1, 0), 3.0);
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        let m = Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
        assert_eq!(SymMatrix::from_matrix(&m), Err(Error::NonFinite("symmetric matrix entries")));
        assert_eq!(SymMatrix::from_matrix(&Matrix::zeros(0, 0)), Err(Error::EmptyInput));
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let k = kron(&Matrix::identity(2), &Matrix::identity(3)).unwrap();
        assert_eq!(k, Matrix::identity(6));
    }

    #[test]
    fn kron_of_diagonals_is_diagonal_of_products() {
        let a = [2.0, 3.0];
        let b = [5.0, 7.0, 11.0];
        let k = kron(&Matrix::from_diag(&a), &Matrix::from_diag(&b)).unwrap();
        let expected: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
        assert_eq!(k, Matrix::from_diag(&expected));
    }

    #[test]
    fn kron_index_convention() {
        let a = Matrix::from_fn(2, 3, |i, j| (1 + i * 3 + j) as f64);
        let b = Matrix::from_fn(3, 2, |i, j| (10 * (1 + i) + j) as f64);
        let k = kron(&a, &b).unwrap();
        for i in 0..2 {
            for kk in 0..3 {
                for j in 0..3 {
                    for l in 0..2 {
                        assert_eq!(k.get(i * 3 + j, kk * 2 + l), a.get(i, kk) * b.get(j, l));
                    }
                }
            }
        }
    }

    #[test]
    fn histogram_examples() {
        let h = spectral_histogram(&[1.0, 1.0, 1.0], 1).unwrap();
        assert_eq!(h.counts, vec![3]);
        let h = spectral_histogram(&[0.0, 1.0], 2).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);
        assert_eq!(spectral_histogram(&[], 3), Err(Error::EmptyInput));
    }

    #[test]
    fn histogram_counts_sum_to_length() {
        let eigs: Vec<f64> = (0..97).map(|i| (i as f64 * 0.37).sin().abs() * 10.0).collect();
        let h = spectral_histogram(&eigs, 7).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), eigs.len());
        assert_eq!(h.edges.len(), 8);
    }

    #[test]
    fn gram_spectrum_pads_with_zeros() {
        let j = Matrix::from_fn(3, 5, |i, k| ((i + 1) * (k + 2)) as f64 + (i * k) as f64 * 0.1);
        let via_rows = gram_spectrum(&j).unwrap();
        let direct = eigenvalues(&gram_columns(&j).unwrap()).unwrap();
        assert_eq!(via_rows.len(), 5);
        let top = direct[4];
        for (a, b) in via_rows.iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-10 * top, "{a} vs {b}");
        }
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }
}
