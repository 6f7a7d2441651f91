//! Compressed sparse row matrices in canonical form (sorted, unique column
//! indices per row).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dense::DenseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, checking the canonical-form invariants.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::InvalidStructure(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::InvalidStructure("row_offsets do not span values".into()));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidStructure("col_indices/values length differ".into()));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::InvalidStructure(format!("row_offsets decrease at row {i}")));
            }
            let cols = &col_indices[lo..hi];
            if cols.iter().any(|&c| c >= n_cols) {
                return Err(Error::InvalidStructure(format!("column out of range in row {i}")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidStructure(format!("row {i} not strictly sorted")));
            }
        }
        Ok(Self { n_rows, n_cols, row_offsets, col_indices, values })
    }

    /// Assembles from (row, col, value) triplets. Duplicates are summed; entries
    /// that sum to zero are kept as explicit zeros.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidStructure(format!(
                    "triplet ({r}, {c}) outside {n_rows}x{n_cols}"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..n_rows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|e| e.0);
            for &(c, v) in &scratch {
                if col_indices.len() > row_offsets[i] && *col_indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self { n_rows, n_cols, row_offsets, col_indices, values })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, row_offsets: vec![0; n_rows + 1], col_indices: Vec::new(), values: Vec::new() }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self { n_rows: n, n_cols: n, row_offsets: (0..=n).collect(), col_indices: (0..n).collect(), values: d.to_vec() }
    }

    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..d.rows() {
            for j in 0..d.cols() {
                let v = d[(i, j)];
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self { n_rows: d.rows(), n_cols: d.cols(), row_offsets, col_indices, values }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    #[inline]
    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    /// Entry (i, j), zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).0.binary_search(&j).is_ok()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn abs_row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().map(|v| v.abs()).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        crate::math::norm2(&self.values)
    }

    /// y = A x
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols, "mul_vec: x has wrong length");
        assert_eq!(y.len(), self.n_rows, "mul_vec: y has wrong length");
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// y = A^T x
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// r = b - A x
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut r = self.mul_vec(x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        r
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_indices[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self { n_rows: self.n_cols, n_cols: self.n_rows, row_offsets: counts, col_indices, values }
    }

    /// Sparse-sparse product. Structurally produced zeros are kept.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                detail: format!("{}x{} * {}x{}", self.n_rows, self.n_cols, other.n_rows, other.n_cols),
            });
        }
        let n = other.n_cols;
        let mut marker = vec![usize::MAX; n];
        let mut acc = vec![0.0; n];
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.n_rows {
            touched.clear();
            let (acols, avals) = self.row(i);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&j, &b) in bcols.iter().zip(bvals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_indices.push(j);
                values.push(acc[j]);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix { n_rows: self.n_rows, n_cols: n, row_offsets, col_indices, values })
    }

    /// Removes stored entries with `|v| <= tol`. With `tol = 0` only exact zeros go.
    pub fn prune(&self, tol: f64) -> SparseMatrix {
        self.filter(|_, _, v| v.abs() > tol)
    }

    /// Keeps the entries for which `keep(row, col, value)` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> SparseMatrix {
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if keep(i, j, v) {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_offsets, col_indices, values }
    }

    pub fn scaled(&self, alpha: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// alpha * self + beta * other over the union pattern.
    pub fn add(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op: "add",
                detail: format!("{:?} vs {:?}", self.shape(), other.shape()),
            });
        }
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n_rows {
            let (ac, av) = self.row(i);
            let (bc, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ac.len() || q < bc.len() {
                if q == bc.len() || (p < ac.len() && ac[p] < bc[q]) {
                    col_indices.push(ac[p]);
                    values.push(alpha * av[p]);
                    p += 1;
                } else if p == ac.len() || bc[q] < ac[p] {
                    col_indices.push(bc[q]);
                    values.push(beta * bv[q]);
                    q += 1;
                } else {
                    col_indices.push(ac[p]);
                    values.push(alpha * av[p] + beta * bv[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_offsets, col_indices, values })
    }

    /// diag(left) * A * diag(right)
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> SparseMatrix {
        let mut out = self.clone();
        for i in 0..self.n_rows {
            let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
            for k in lo..hi {
                out.values[k] *= left[i] * right[self.col_indices[k]];
            }
        }
        out
    }

    /// Rows `r0..r1`, columns `c0..c1`, reindexed from zero.
    pub fn block(&self, rows: core::ops::Range<usize>, cols: core::ops::Range<usize>) -> SparseMatrix {
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in rows.clone() {
            let (cs, vs) = self.row(i);
            let lo = cs.partition_point(|&c| c < cols.start);
            let hi = cs.partition_point(|&c| c < cols.end);
            for k in lo..hi {
                col_indices.push(cs[k] - cols.start);
                values.push(vs[k]);
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix { n_rows: rows.len(), n_cols: cols.len(), row_offsets, col_indices, values }
    }

    /// Assembles a block matrix from a grid of optional blocks. Block row heights
    /// and column widths are taken from the given sizes.
    pub fn from_blocks(row_sizes: &[usize], col_sizes: &[usize], blocks: &[&[Option<&SparseMatrix>]]) -> Result<SparseMatrix> {
        let n_rows: usize = row_sizes.iter().sum();
        let n_cols: usize = col_sizes.iter().sum();
        let mut col_starts = vec![0];
        for &c in col_sizes {
            col_starts.push(col_starts.last().unwrap() + c);
        }
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for (bi, &h) in row_sizes.iter().enumerate() {
            for (bj, blk) in blocks[bi].iter().enumerate() {
                if let Some(m) = blk {
                    if m.n_rows != h || m.n_cols != col_sizes[bj] {
                        return Err(Error::DimensionMismatch {
                            op: "from_blocks",
                            detail: format!("block ({bi},{bj}) is {:?}", m.shape()),
                        });
                    }
                }
            }
            for i in 0..h {
                for (bj, blk) in blocks[bi].iter().enumerate() {
                    if let Some(m) = blk {
                        let (cs, vs) = m.row(i);
                        col_indices.extend(cs.iter().map(|&c| c + col_starts[bj]));
                        values.extend_from_slice(vs);
                    }
                }
                row_offsets.push(col_indices.len());
            }
        }
        Ok(SparseMatrix { n_rows, n_cols, row_offsets, col_indices, values })
    }

    /// Symmetric permutation: row/col `perm[k]` of `self` becomes row/col `k`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> SparseMatrix {
        let n = self.n_rows;
        let mut inv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for &old in perm {
            scratch.clear();
            let (cs, vs) = self.row(old);
            scratch.extend(cs.iter().zip(vs).map(|(&c, &v)| (inv[c], v)));
            scratch.sort_unstable_by_key(|e| e.0);
            for &(c, v) in &scratch {
                col_indices.push(c);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix { n_rows: n, n_cols: n, row_offsets, col_indices, values }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// Largest |a_ij - a_ji| relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        match self.add(1.0, &t, -1.0) {
            Ok(diff) => {
                let m = self.max_abs();
                if m == 0.0 { 0.0 } else { diff.max_abs() / m }
            }
            Err(_) => f64::INFINITY,
        }
    }

    /// Maximum |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    /// Binary copy of the pattern (all stored values set to one).
    pub fn pattern(&self) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = 1.0);
        out
    }
}

/// Exact sparse product R·A·P with structurally produced zeros removed.
pub fn triple_product(r: &SparseMatrix, a: &SparseMatrix, p: &SparseMatrix) -> Result<SparseMatrix> {
    if r.n_cols() != a.n_rows() || a.n_cols() != p.n_rows() {
        return Err(Error::DimensionMismatch {
            op: "triple_product",
            detail: format!("R {:?}, A {:?}, P {:?}", r.shape(), a.shape(), p.shape()),
        });
    }
    Ok(r.matmul(&a.matmul(p)?)?.prune(0.0))
}
