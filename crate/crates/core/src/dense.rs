//! Small dense kernels: row-major matrices, LU with partial pivoting, a
//! cyclic Jacobi symmetric eigensolver and singular values.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::math::{hypot, sqrt};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_row_major",
                detail: format!("{} values for {rows}x{cols}", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                op: "dense matmul",
                detail: format!("{}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols),
            });
        }
        let mut c = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let brow = other.row(k);
                let crow = &mut c.data[i * other.cols..(i + 1) * other.cols];
                for (cv, bv) in crow.iter_mut().zip(brow) {
                    *cv += a * bv;
                }
            }
        }
        Ok(c)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| crate::math::dot(self.row(i), x)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial (row) pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    /// Fails with [`Error::Singular`] when a pivot column is exactly zero.
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::DimensionMismatch { op: "lu", detail: format!("{}x{}", a.rows, a.cols) });
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular(k));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = lu[k * n + k];
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let krow = &head[k * n..];
            for i in 0..n - k - 1 {
                let row = &mut tail[i * n..(i + 1) * n];
                let l = row[k] / pivot;
                row[k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        row[j] -= l * krow[j];
                    }
                }
            }
        }
        Ok(Self { n, lu, piv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&y[i + 1..]).map(|(u, v)| u * v).sum();
            y[i] = (y[i] - s) / row[i];
        }
        b.copy_from_slice(&y);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second result.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if a.rows != a.cols {
        return Err(Error::DimensionMismatch { op: "symmetric_eigen", detail: format!("{}x{}", a.rows, a.cols) });
    }
    let n = a.rows;
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if sqrt(off) <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + hypot(theta, 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / hypot(t, 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let vals = idx.iter().map(|&i| m[(i, i)]).collect();
    let mut vecs = DenseMatrix::zeros(n, n);
    for (new, &old) in idx.iter().enumerate() {
        for k in 0..n {
            vecs[(k, new)] = v[(k, old)];
        }
    }
    Ok((vals, vecs))
}

/// Applies the Householder reflector that zeroes `x[1..]`, returning the
/// normalized vector `v` (with `v[0] = 1`), `tau` and the resulting `beta`.
fn householder(x: &[f64]) -> (Vec<f64>, f64, f64) {
    let alpha = x[0];
    let sigma: f64 = x[1..].iter().map(|v| v * v).sum();
    let mut v = x.to_vec();
    v[0] = 1.0;
    if sigma == 0.0 {
        return (v, 0.0, alpha);
    }
    let norm = sqrt(alpha * alpha + sigma);
    let beta = if alpha <= 0.0 { norm } else { -norm };
    let v0 = alpha - beta;
    for vi in v[1..].iter_mut() {
        *vi /= v0;
    }
    let tau = (beta - alpha) / beta;
    (v, tau, beta)
}

/// Upper-bidiagonal form of a tall matrix given as columns. Returns the
/// diagonal and superdiagonal.
fn bidiagonalize(mut cols: Vec<Vec<f64>>, m: usize) -> (Vec<f64>, Vec<f64>) {
    let n = cols.len();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    for k in 0..n {
        let (v, tau, beta) = householder(&cols[k][k..m]);
        d[k] = beta;
        cols[k][k] = beta;
        for x in cols[k][k + 1..m].iter_mut() {
            *x = 0.0;
        }
        if tau != 0.0 {
            for col in cols[k + 1..].iter_mut() {
                let s = tau * crate::math::dot(&v, &col[k..m]);
                crate::math::axpy(-s, &v, &mut col[k..m]);
            }
        }
        if k + 1 < n {
            let row: Vec<f64> = (k + 1..n).map(|j| cols[j][k]).collect();
            let (w, tau, beta) = householder(&row);
            e[k] = beta;
            cols[k + 1][k] = beta;
            for j in k + 2..n {
                cols[j][k] = 0.0;
            }
            if tau != 0.0 {
                let mut acc = vec![0.0; m - k - 1];
                for (t, &wt) in w.iter().enumerate() {
                    crate::math::axpy(wt, &cols[k + 1 + t][k + 1..m], &mut acc);
                }
                for (t, &wt) in w.iter().enumerate() {
                    crate::math::axpy(-tau * wt, &acc, &mut cols[k + 1 + t][k + 1..m]);
                }
            }
        }
    }
    (d, e)
}

/// Householder QR of a tall matrix stored by columns; returns the columns of
/// the square upper-triangular factor.
fn qr_r_factor(mut cols: Vec<Vec<f64>>, m: usize) -> Vec<Vec<f64>> {
    let n = cols.len();
    for k in 0..n {
        let (v, tau, beta) = householder(&cols[k][k..m]);
        cols[k][k] = beta;
        if tau != 0.0 {
            for col in cols[k + 1..].iter_mut() {
                let s = tau * crate::math::dot(&v, &col[k..m]);
                crate::math::axpy(-s, &v, &mut col[k..m]);
            }
        }
    }
    cols.into_iter()
        .enumerate()
        .map(|(k, mut c)| {
            c.truncate(n);
            for x in c[k + 1..].iter_mut() {
                *x = 0.0;
            }
            c
        })
        .collect()
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// zero diagonal and off-diagonal `off`.
fn sturm_count(off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = -x;
    if q < 0.0 {
        count += 1;
    }
    for &b in off {
        let prev = if q == 0.0 { f64::EPSILON * (b.abs() + x.abs()).max(f64::MIN_POSITIVE) } else { q };
        q = -x - b * b / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Singular values of an upper bidiagonal matrix, found by bisection on the
/// Golub-Kahan tridiagonal whose eigenvalues are the pairs ±σ.
struct Bidiagonal {
    off: Vec<f64>,
    n: usize,
    bound: f64,
}

impl Bidiagonal {
    fn new(d: &[f64], e: &[f64]) -> Self {
        let n = d.len();
        let mut off = Vec::with_capacity(2 * n);
        for k in 0..n {
            off.push(d[k]);
            if k + 1 < n {
                off.push(e[k]);
            }
        }
        let bound = 2.0 * off.iter().fold(0.0f64, |m, v| m.max(v.abs())) + f64::MIN_POSITIVE;
        Self { off, n, bound }
    }

    /// Number of singular values strictly above `x >= 0`.
    fn count_above(&self, x: f64) -> usize {
        2 * self.n - sturm_count(&self.off, x)
    }

    /// The k-th largest singular value, k = 1..=n.
    fn kth_largest(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = (0.0, self.bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_above(mid) >= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn to_bidiagonal(a: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let a = if a.rows >= a.cols { a.clone() } else { a.transpose() };
    let (m, n) = (a.rows, a.cols);
    let cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let cols = if m > n { qr_r_factor(cols, m) } else { cols };
    bidiagonalize(cols, n)
}

/// All singular values, in descending order.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    if a.rows == 0 || a.cols == 0 {
        return Vec::new();
    }
    let (d, e) = to_bidiagonal(a);
    let bd = Bidiagonal::new(&d, &e);
    (1..=bd.n).map(|k| bd.kth_largest(k)).collect()
}

/// Smallest singular value exceeding `zero_tol · σ_max`.
pub fn smallest_nonzero_singular_value(a: &DenseMatrix, zero_tol: f64) -> Result<f64> {
    if a.rows == 0 || a.cols == 0 {
        return Err(Error::NumericallyZero);
    }
    let (d, e) = to_bidiagonal(a);
    let bd = Bidiagonal::new(&d, &e);
    let smax = bd.kth_largest(1);
    if smax == 0.0 {
        return Err(Error::NumericallyZero);
    }
    let cut = zero_tol * smax;
    let k = bd.count_above(cut);
    if k == 0 {
        return Err(Error::NumericallyZero);
    }
    Ok(bd.kth_largest(k))
}
