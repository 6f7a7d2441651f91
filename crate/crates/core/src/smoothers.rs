//! Relaxation methods for saddle-point operators
//! `K = [[A, Bᵀ], [B, C]]` with velocities first.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::dense::{DenseLu, DenseMatrix};
use crate::graph::{rcm_ordering, Permutation};
use crate::{Error, Result, SparseMatrix};

/// Forward Gauss-Seidel sweeps in ascending index order.
pub fn gauss_seidel(a: &SparseMatrix, x: &mut [f64], b: &[f64], sweeps: usize) -> Result<()> {
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDiagonal(i));
    }
    for _ in 0..sweeps {
        for i in 0..a.n_rows() {
            let (cols, vals) = a.row(i);
            let mut s = b[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    s -= v * x[j];
                }
            }
            x[i] = s / diag[i];
        }
    }
    Ok(())
}

fn row_residual(k: &SparseMatrix, x: &[f64], b: &[f64], i: usize) -> f64 {
    let (cols, vals) = k.row(i);
    b[i] - cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct VankaBlock {
    /// Velocity dofs in ascending order followed by the pressure dof.
    pub dofs: Vec<usize>,
    lu: DenseLu,
}

/// Overlapping block Gauss-Seidel over the local saddle problems around
/// each pressure dof.
#[derive(Debug, Clone)]
pub struct Vanka {
    pub omega: f64,
    pub blocks: Vec<VankaBlock>,
    /// Dofs in no block; they receive a point Gauss-Seidel update.
    pub uncovered: Vec<usize>,
}

impl Vanka {
    pub fn new(k: &SparseMatrix, n_v: usize, omega: f64) -> Result<Self> {
        let n = k.n_rows();
        let mut local = vec![usize::MAX; n];
        let mut covered = vec![false; n];
        let mut blocks = Vec::with_capacity(n - n_v);
        for p in n_v..n {
            let (cols, _) = k.row(p);
            let mut dofs: Vec<usize> = cols.iter().copied().filter(|&j| j < n_v).collect();
            dofs.push(p);
            for (l, &d) in dofs.iter().enumerate() {
                local[d] = l;
                covered[d] = true;
            }
            let m = dofs.len();
            let mut dense = vec![0.0; m * m];
            for (r, &d) in dofs.iter().enumerate() {
                let (cols, vals) = k.row(d);
                for (&j, &v) in cols.iter().zip(vals) {
                    if local[j] != usize::MAX {
                        dense[r * m + local[j]] = v;
                    }
                }
            }
            for &d in &dofs {
                local[d] = usize::MAX;
            }
            let lu = DenseLu::factor(&DenseMatrix::from_row_major(m, m, dense)?)
                .map_err(|_| Error::SingularVankaBlock(p - n_v))?;
            blocks.push(VankaBlock { dofs, lu });
        }
        let uncovered = (0..n).filter(|&i| !covered[i]).collect::<Vec<_>>();
        if let Some(&i) = uncovered.iter().find(|&&i| k.get(i, i) == 0.0) {
            return Err(Error::ZeroDiagonal(i));
        }
        Ok(Self { omega, blocks, uncovered })
    }

    pub fn sweep(&self, k: &SparseMatrix, x: &mut [f64], b: &[f64]) {
        for &i in &self.uncovered {
            x[i] += self.omega * row_residual(k, x, b, i) / k.get(i, i);
        }
        let mut r = Vec::new();
        for blk in &self.blocks {
            r.clear();
            r.extend(blk.dofs.iter().map(|&d| row_residual(k, x, b, d)));
            blk.lu.solve_in_place(&mut r);
            for (&d, &e) in blk.dofs.iter().zip(&r) {
                x[d] += self.omega * e;
            }
        }
    }
}

/// Braess-Sarazin relaxation with the diagonal `D = diag(Σ_j |A_ij|)` and an
/// approximate Schur solve by Gauss-Seidel.
#[derive(Debug, Clone)]
pub struct BraessSarazin {
    pub omega: f64,
    pub inner_sweeps: usize,
    pub d_inv: Vec<f64>,
    /// `B D⁻¹ Bᵀ`.
    pub s: SparseMatrix,
    b: SparseMatrix,
    bt: SparseMatrix,
}

impl BraessSarazin {
    pub fn new(k: &SparseMatrix, n_v: usize, omega: f64, inner_sweeps: usize) -> Result<Self> {
        let n = k.n_rows();
        let a = k.block(0..n_v, 0..n_v);
        let d = a.abs_row_sums();
        if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::ZeroDiagonal(i));
        }
        let d_inv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
        let b = k.block(n_v..n, 0..n_v);
        let bt = k.block(0..n_v, n_v..n);
        let ones = vec![1.0; n - n_v];
        let s = b.scale_rows_cols(&ones, &d_inv).matmul(&bt)?;
        Ok(Self { omega, inner_sweeps, d_inv, s, b, bt })
    }

    pub fn step(&self, k: &SparseMatrix, x: &mut [f64], rhs: &[f64]) -> Result<()> {
        let n_v = self.d_inv.len();
        let r = k.residual(x, rhs);
        let (r_u, r_p) = r.split_at(n_v);
        let y: Vec<f64> = r_u.iter().zip(&self.d_inv).map(|(r, d)| self.omega * d * r).collect();
        let by = self.b.mul_vec(&y);
        let schur_rhs: Vec<f64> = by.iter().zip(r_p).map(|(a, b)| (a - b) / self.omega).collect();
        let mut q = vec![0.0; r_p.len()];
        gauss_seidel(&self.s, &mut q, &schur_rhs, self.inner_sweeps)?;
        let btq = self.bt.mul_vec(&q);
        for i in 0..n_v {
            x[i] += y[i] - self.omega * self.d_inv[i] * btq[i];
        }
        for (xp, qp) in x[n_v..].iter_mut().zip(&q) {
            *xp += qp;
        }
        Ok(())
    }
}

/// Incomplete LU with level-of-fill `k`; the diagonal is always part of the
/// level-zero pattern.
#[derive(Debug, Clone)]
pub struct Ilu {
    perm: Option<Permutation>,
    /// Strict lower part holds L (unit diagonal implied), the rest is U.
    lu: SparseMatrix,
    diag_pos: Vec<usize>,
    pub pivot_replacements: usize,
}

impl Ilu {
    pub fn new(a: &SparseMatrix, fill: usize, rcm: bool) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::DimensionMismatch { op: "ilu", detail: alloc::format!("{:?}", a.shape()) });
        }
        let perm = rcm.then(|| rcm_ordering(a));
        let a = match &perm {
            Some(p) => a.permute_symmetric(p.forward()),
            None => a.clone(),
        };
        let n = a.n_rows();
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut levels: Vec<usize> = Vec::new();
        let mut diag_pos = vec![0; n];
        for i in 0..n {
            let mut row: BTreeMap<usize, usize> = a.row(i).0.iter().map(|&j| (j, 0)).collect();
            row.insert(i, 0);
            let mut next = row.range(..i).next().map(|(&k, _)| k);
            while let Some(k) = next {
                let lik = row[&k];
                if lik < fill {
                    for p in diag_pos[k] + 1..offsets[k + 1] {
                        let lev = lik + levels[p] + 1;
                        if lev <= fill {
                            let e = row.entry(cols[p]).or_insert(lev);
                            *e = (*e).min(lev);
                        }
                    }
                }
                next = row.range(k + 1..i).next().map(|(&k, _)| k);
            }
            for (j, l) in row {
                if j == i {
                    diag_pos[i] = cols.len();
                }
                cols.push(j);
                levels.push(l);
            }
            offsets.push(cols.len());
        }
        let mut values = vec![0.0; cols.len()];
        let mut where_ = vec![usize::MAX; n];
        let mut pivot_replacements = 0;
        for i in 0..n {
            let range = offsets[i]..offsets[i + 1];
            for p in range.clone() {
                where_[cols[p]] = p;
            }
            let (ac, av) = a.row(i);
            for (&j, &v) in ac.iter().zip(av) {
                values[where_[j]] = v;
            }
            for p in offsets[i]..diag_pos[i] {
                let k = cols[p];
                let lik = values[p] / values[diag_pos[k]];
                values[p] = lik;
                for q in diag_pos[k] + 1..offsets[k + 1] {
                    let w = where_[cols[q]];
                    if w != usize::MAX {
                        values[w] -= lik * values[q];
                    }
                }
            }
            let row_norm = av.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let piv = values[diag_pos[i]];
            if piv.abs() <= 1e-14 * row_norm || piv == 0.0 {
                let mag = 1e-8 * if row_norm > 0.0 { row_norm } else { 1.0 };
                values[diag_pos[i]] = if piv < 0.0 { -mag } else { mag };
                pivot_replacements += 1;
            }
            for p in range {
                where_[cols[p]] = usize::MAX;
            }
        }
        if pivot_replacements > 0 {
            log::warn!("ilu: replaced {pivot_replacements} small pivots");
        }
        let lu = SparseMatrix::new(n, n, offsets, cols, values)?;
        Ok(Self { perm, lu, diag_pos, pivot_replacements })
    }

    /// Number of stored entries in L + U.
    pub fn nnz(&self) -> usize {
        self.lu.nnz()
    }

    /// Combined factors in the (possibly permuted) ordering.
    pub fn factors(&self) -> &SparseMatrix {
        &self.lu
    }

    pub fn permutation(&self) -> Option<&Permutation> {
        self.perm.as_ref()
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut y = match &self.perm {
            Some(p) => p.apply(r),
            None => r.to_vec(),
        };
        let n = y.len();
        for i in 0..n {
            let (cols, vals) = self.lu.row(i);
            let mut s = y[i];
            for (&j, &v) in cols.iter().zip(vals).take_while(|(&j, _)| j < i) {
                s -= v * y[j];
            }
            y[i] = s;
        }
        let offsets = self.lu.row_offsets();
        let cols = self.lu.col_indices();
        let vals = self.lu.values();
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in self.diag_pos[i] + 1..offsets[i + 1] {
                s -= vals[p] * y[cols[p]];
            }
            y[i] = s / vals[self.diag_pos[i]];
        }
        match &self.perm {
            Some(p) => p.apply_inverse(&y),
            None => y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmootherKind {
    Vanka { omega: f64 },
    BraessSarazin { omega: f64, inner_sweeps: usize },
    Ilu { fill: usize, rcm: bool },
}

impl SmootherKind {
    pub fn vanka() -> Self {
        SmootherKind::Vanka { omega: 0.5 }
    }

    pub fn braess_sarazin() -> Self {
        SmootherKind::BraessSarazin { omega: 0.666, inner_sweeps: 5 }
    }

    pub fn ilu() -> Self {
        SmootherKind::Ilu { fill: 1, rcm: true }
    }
}

#[derive(Debug, Clone)]
pub enum Smoother {
    Vanka(Vanka),
    BraessSarazin(BraessSarazin),
    Ilu(Ilu),
}

impl Smoother {
    pub fn new(kind: SmootherKind, k: &SparseMatrix, n_v: usize) -> Result<Self> {
        Ok(match kind {
            SmootherKind::Vanka { omega } => Smoother::Vanka(Vanka::new(k, n_v, omega)?),
            SmootherKind::BraessSarazin { omega, inner_sweeps } => {
                Smoother::BraessSarazin(BraessSarazin::new(k, n_v, omega, inner_sweeps)?)
            }
            SmootherKind::Ilu { fill, rcm } => Smoother::Ilu(Ilu::new(k, fill, rcm)?),
        })
    }

    /// Applies `steps` relaxation steps to `x` in place.
    pub fn smooth(&self, k: &SparseMatrix, x: &mut [f64], b: &[f64], steps: usize) -> Result<()> {
        for _ in 0..steps {
            match self {
                Smoother::Vanka(v) => v.sweep(k, x, b),
                Smoother::BraessSarazin(bs) => bs.step(k, x, b)?,
                Smoother::Ilu(ilu) => {
                    let e = ilu.apply(&k.residual(x, b));
                    x.iter_mut().zip(e).for_each(|(x, e)| *x += e);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{stokes_problem, ProblemSpec};
    use crate::math::norm2;
    use rand::{Rng, SeedableRng};

    fn tridiag(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn cavity8() -> (SparseMatrix, usize) {
        let (_, sys) = stokes_problem(&ProblemSpec::lid_cavity(8)).unwrap();
        (sys.full_operator(), sys.n_velocity())
    }

    #[test]
    fn gauss_seidel_matches_dense_oracle() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let n = 6;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                if i != j && rng.gen_bool(0.6) {
                    d[i * n + j] = rng.gen_range(-1.0..1.0);
                    off += f64::abs(d[i * n + j]);
                }
            }
            d[i * n + i] = off + 1.0;
        }
        let dense = DenseMatrix::from_row_major(n, n, d.clone()).unwrap();
        let a = SparseMatrix::from_dense(&dense);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut x = vec![0.0; n];
        gauss_seidel(&a, &mut x, &b, 3).unwrap();
        let mut y = vec![0.0; n];
        for _ in 0..3 {
            for i in 0..n {
                let mut s = b[i];
                for j in 0..n {
                    if j != i && d[i * n + j] != 0.0 {
                        s -= d[i * n + j] * y[j];
                    }
                }
                y[i] = s / d[i * n + i];
            }
        }
        assert_eq!(x, y);
    }

    #[test]
    fn gauss_seidel_diagonal_and_laplacian() {
        let a = SparseMatrix::from_diagonal(&[2.0, 4.0]);
        let mut x = vec![0.0; 2];
        gauss_seidel(&a, &mut x, &[2.0, 2.0], 1).unwrap();
        assert_eq!(x, vec![1.0, 0.5]);
        let a = tridiag(5);
        let mut x = vec![1.0, -0.3, 0.7, 0.2, -0.9];
        let mut prev = norm2(&x);
        for _ in 0..5 {
            gauss_seidel(&a, &mut x, &[0.0; 5], 1).unwrap();
            assert!(norm2(&x) < prev);
            prev = norm2(&x);
        }
        let z = SparseMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(gauss_seidel(&z, &mut [0.0; 2], &[0.0; 2], 1), Err(Error::ZeroDiagonal(1))));
    }

    #[test]
    fn vanka_single_block_is_exact() {
        let k = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let v = Vanka::new(&k, 1, 1.0).unwrap();
        let mut x = vec![0.0; 2];
        v.sweep(&k, &mut x, &[3.0, 2.0]);
        assert_eq!(x, vec![2.0, 1.0]);
        let v0 = Vanka::new(&k, 1, 0.0).unwrap();
        let mut x = vec![0.5, 0.5];
        v0.sweep(&k, &mut x, &[3.0, 2.0]);
        assert_eq!(x, vec![0.5, 0.5]);
    }

    #[test]
    fn vanka_block_sizes_on_cavity() {
        let (k, n_v) = cavity8();
        let v = Vanka::new(&k, n_v, 0.5).unwrap();
        assert_eq!(v.blocks.iter().map(|b| b.dofs.len()).max(), Some(51));
        let mut count = vec![0; k.n_rows()];
        for b in &v.blocks {
            for &d in &b.dofs {
                count[d] += 1;
            }
        }
        for p in n_v..k.n_rows() {
            assert_eq!(count[p], 1);
        }
    }

    #[test]
    fn braess_sarazin_exact_case() {
        // A diagonal with positive entries makes D = A; one pressure makes GS exact
        let k = SparseMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 4.0), (0, 2, 1.0), (1, 2, -1.0), (2, 0, 1.0), (2, 1, -1.0)]).unwrap();
        let bs = BraessSarazin::new(&k, 2, 1.0, 1).unwrap();
        let x_true = [1.0, -2.0, 0.5];
        let b = k.mul_vec(&x_true);
        let mut x = vec![0.0; 3];
        bs.step(&k, &mut x, &b).unwrap();
        for (a, b) in x.iter().zip(x_true) {
            assert!((a - b).abs() < 1e-14);
        }
        let mut x2 = x_true.to_vec();
        bs.step(&k, &mut x2, &b).unwrap();
        assert_eq!(x2, x_true.to_vec());
    }

    #[test]
    fn braess_sarazin_diagonal_is_positive_on_cavity() {
        let (k, n_v) = cavity8();
        let bs = BraessSarazin::new(&k, n_v, 0.666, 5).unwrap();
        assert!(bs.d_inv.iter().all(|&d| d > 0.0));
        assert!(bs.s.symmetry_defect() < 1e-12 * bs.s.max_abs());
    }

    #[test]
    fn ilu_exact_on_tridiagonal() {
        let a = tridiag(10);
        for rcm in [false, true] {
            let ilu = Ilu::new(&a, 1, rcm).unwrap();
            let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
            let y = ilu.apply(&a.mul_vec(&x));
            for (u, v) in x.iter().zip(&y) {
                assert!((u - v).abs() < 1e-12);
            }
        }
        let id = Ilu::new(&SparseMatrix::identity(4), 1, false).unwrap();
        assert_eq!(id.factors(), &SparseMatrix::identity(4));
    }

    #[test]
    fn ilu_pattern_grows_with_fill() {
        let (k, _) = cavity8();
        let i0 = Ilu::new(&k, 0, true).unwrap();
        let i1 = Ilu::new(&k, 1, true).unwrap();
        assert!(i1.nnz() > i0.nnz());
        assert_eq!(i1.pivot_replacements, 0);
        let pat0 = i0.factors().pattern();
        let pat1 = i1.factors().pattern();
        for (i, j, _) in pat0.triplets() {
            assert!(pat1.contains(i, j));
        }
    }

    #[test]
    fn smoothers_reduce_cavity_residual() {
        let (k, n_v) = cavity8();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let b: Vec<f64> = (0..k.n_rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for kind in [SmootherKind::vanka(), SmootherKind::braess_sarazin(), SmootherKind::ilu()] {
            let s = Smoother::new(kind, &k, n_v).unwrap();
            let mut x = vec![0.0; k.n_rows()];
            let r0 = norm2(&b);
            s.smooth(&k, &mut x, &b, 10).unwrap();
            assert!(norm2(&k.residual(&x, &b)) < r0, "{kind:?}");
        }
    }
}
