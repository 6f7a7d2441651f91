//! Stability diagnostics: the one-dimensional staggered-grid study of coarse
//! velocity placement and a singular-value probe of the scaled divergence on
//! every level of a hierarchy.

use alloc::vec;
use alloc::vec::Vec;

use crate::dense::{smallest_nonzero_singular_value, symmetric_eigen, DenseLu, DenseMatrix};
use crate::hierarchy::Hierarchy;
use crate::math::sqrt;
use crate::{Error, Result, SparseMatrix};

/// One-dimensional staggered system with `n` pressures at `0..n` and `n-1`
/// velocities at the midpoints `j + 1/2`.
#[derive(Debug, Clone)]
pub struct Mac1dSystem {
    pub n: usize,
    /// `n × (n-1)` difference matrix: column `j` holds `-1` at row `j` and
    /// `+1` at row `j+1`. It is the divergence block; its transpose is the
    /// gradient block.
    pub b: SparseMatrix,
}

impl Mac1dSystem {
    pub fn n_velocity(&self) -> usize {
        self.n - 1
    }

    /// `[[I, Bᵀ], [-B, 0]]`.
    pub fn full_operator(&self) -> SparseMatrix {
        let nv = self.n - 1;
        let id = SparseMatrix::identity(nv);
        let bt = self.b.transpose();
        let mb = self.b.scaled(-1.0);
        SparseMatrix::from_blocks(&[nv, self.n], &[nv, self.n], &[&[Some(&id), Some(&bt)], &[Some(&mb), None]])
            .expect("blocks are conformal")
    }
}

pub fn build_mac1d(n: usize) -> Result<Mac1dSystem> {
    if n < 4 {
        return Err(Error::InvalidProblem(alloc::format!("need at least 4 pressures, got {n}")));
    }
    let mut t = Vec::with_capacity(2 * (n - 1));
    for j in 0..n - 1 {
        t.push((j, j, -1.0));
        t.push((j + 1, j, 1.0));
    }
    Ok(Mac1dSystem { n, b: SparseMatrix::from_triplets(n, n - 1, &t)? })
}

/// Where coarse velocities sit relative to the coarse pressures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityPlacement {
    /// At the coarse pressure positions.
    CoLocated,
    /// Halfway between neighbouring coarse pressures.
    MidPoint,
}

/// Linear interpolation from nodes at `coarse` positions (ascending) to the
/// `fine` positions. Fine points beyond the outermost coarse nodes either
/// take the nearest coarse value (`anchors = None`) or interpolate against
/// zero values at the anchor positions.
fn linear_interpolation(fine: &[f64], coarse: &[f64], anchors: Option<(f64, f64)>) -> Result<SparseMatrix> {
    let mut nodes: Vec<(f64, Option<usize>)> = coarse.iter().enumerate().map(|(k, &x)| (x, Some(k))).collect();
    if let Some((lo, hi)) = anchors {
        nodes.insert(0, (lo, None));
        nodes.push((hi, None));
    }
    let (first, last) = (coarse[0], coarse[coarse.len() - 1]);
    let mut t = Vec::new();
    for (i, &x) in fine.iter().enumerate() {
        if anchors.is_none() && x <= first {
            t.push((i, 0, 1.0));
            continue;
        }
        if anchors.is_none() && x >= last {
            t.push((i, coarse.len() - 1, 1.0));
            continue;
        }
        let Some(s) = nodes.windows(2).position(|w| w[0].0 <= x && x <= w[1].0) else {
            return Err(Error::InvalidStructure(alloc::format!("position {x} outside the coarse grid")));
        };
        let ((x0, c0), (x1, c1)) = (nodes[s], nodes[s + 1]);
        let w1 = (x - x0) / (x1 - x0);
        if let Some(c) = c0 {
            t.push((i, c, 1.0 - w1));
        }
        if let Some(c) = c1 {
            t.push((i, c, w1));
        }
    }
    Ok(SparseMatrix::from_triplets(fine.len(), coarse.len(), &t)?.prune(0.0))
}

/// Projected Schur complements `(S, Ŝ)` with coarse pressures at the odd
/// fine pressures `1, 3, …, n-2`:
/// `S = P_pᵀ B P_v (P_vᵀ P_v)⁻¹ P_vᵀ Bᵀ P_p` and `Ŝ = P_pᵀ B P_v P_vᵀ Bᵀ P_p`.
/// End pressures copy the nearest coarse pressure; end velocities
/// interpolate against zero Dirichlet values at `-1/2` and `n - 1/2`.
pub fn projected_mac_schur(sys: &Mac1dSystem, placement: VelocityPlacement) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = sys.n;
    if n % 2 == 0 || n < 5 {
        return Err(Error::InvalidProblem(alloc::format!("coarsening by two needs an odd number (≥ 5) of pressures, got {n}")));
    }
    let fine_p: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let coarse_p: Vec<f64> = (1..n - 1).step_by(2).map(|i| i as f64).collect();
    let fine_v: Vec<f64> = (0..n - 1).map(|j| j as f64 + 0.5).collect();
    let dirichlet = Some((-0.5, n as f64 - 0.5));
    let p_p = linear_interpolation(&fine_p, &coarse_p, None)?;
    let p_v = match placement {
        VelocityPlacement::CoLocated => linear_interpolation(&fine_v, &coarse_p, dirichlet)?,
        VelocityPlacement::MidPoint => {
            let mids: Vec<f64> = (2..n - 2).step_by(2).map(|i| i as f64).collect();
            linear_interpolation(&fine_v, &mids, dirichlet)?
        }
    };
    // G = P_vᵀ Bᵀ P_p
    let g = p_v.transpose().matmul(&sys.b.transpose())?.matmul(&p_p)?.to_dense();
    let s_hat = g.transpose().matmul(&g)?;
    let gram = p_v.transpose().matmul(&p_v)?.to_dense();
    let lu = DenseLu::factor(&gram)?;
    let (rows, cols) = (g.rows(), g.cols());
    let mut flat = vec![0.0; rows * cols];
    for c in 0..cols {
        let col: Vec<f64> = (0..rows).map(|r| g[(r, c)]).collect();
        for (r, v) in lu.solve(&col).into_iter().enumerate() {
            flat[r * cols + c] = v;
        }
    }
    let x = DenseMatrix::from_row_major(rows, cols, flat)?;
    let s = g.transpose().matmul(&x)?;
    Ok((s, s_hat))
}

/// Sign changes along a vector, skipping entries below `1e-10 · max|v|`.
pub fn sign_changes(v: &[f64]) -> usize {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut last = 0.0f64;
    let mut changes = 0;
    for &x in v {
        if x.abs() <= 1e-10 * scale {
            continue;
        }
        if last != 0.0 && (x > 0.0) != (last > 0.0) {
            changes += 1;
        }
        last = x;
    }
    changes
}

/// Eigenpair for the second-smallest eigenvalue of a symmetric positive
/// semidefinite matrix once its null space (eigenvalues at most
/// `1e-10 · λ_max`) is set aside.
pub fn second_eigenvector(s: &DenseMatrix) -> Result<(f64, Vec<f64>)> {
    let (vals, vecs) = symmetric_eigen(s)?;
    let top = vals.last().copied().unwrap_or(0.0);
    let first = vals.iter().position(|&v| v > 1e-10 * top).unwrap_or(vals.len());
    let k = first + 1;
    if k >= vals.len() {
        return Err(Error::InvalidProblem("fewer than two nonzero eigenvalues".into()));
    }
    Ok((vals[k], (0..s.rows()).map(|r| vecs[(r, k)]).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfSupLevel {
    pub level: usize,
    /// Rows and columns of the scaled divergence after dropping empty ones.
    pub rows: usize,
    pub cols: usize,
    pub sigma_min: f64,
    pub min_lumped_velocity_mass: f64,
    pub min_lumped_pressure_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfSupReport {
    pub levels: Vec<InfSupLevel>,
}

impl InfSupReport {
    pub fn to_csv(&self) -> alloc::string::String {
        let mut s = alloc::string::String::from("level,rows,sigma_min\n");
        for l in &self.levels {
            s.push_str(&alloc::format!("{},{},{:.6}\n", l.level, l.rows, l.sigma_min));
        }
        s
    }
}

fn lumped(m: &SparseMatrix, level: usize) -> Result<Vec<f64>> {
    let d = m.abs_row_sums();
    if let Some(row) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonPositiveLumpedMass { level, row });
    }
    Ok(d)
}

/// Smallest nonzero singular value of the mass-scaled divergence
/// `lump(|M_p|)^{-1/2} B lump(|M_v|)^{-1/2}` on one level.
pub fn scaled_divergence_sigma(b: &SparseMatrix, m_v: &SparseMatrix, m_p: &SparseMatrix, level: usize) -> Result<InfSupLevel> {
    let dv = lumped(m_v, level)?;
    let dp = lumped(m_p, level)?;
    let left: Vec<f64> = dp.iter().map(|d| 1.0 / sqrt(*d)).collect();
    let right: Vec<f64> = dv.iter().map(|d| 1.0 / sqrt(*d)).collect();
    let bt = b.scale_rows_cols(&left, &right).prune(0.0);
    let rows: Vec<usize> = (0..bt.n_rows()).filter(|&i| bt.row_nnz(i) > 0).collect();
    let mut col_used = vec![false; bt.n_cols()];
    for &j in bt.col_indices() {
        col_used[j] = true;
    }
    let mut col_map = vec![usize::MAX; bt.n_cols()];
    let mut nc = 0;
    for j in 0..bt.n_cols() {
        if col_used[j] {
            col_map[j] = nc;
            nc += 1;
        }
    }
    let mut dense = vec![0.0; rows.len() * nc];
    for (r, &i) in rows.iter().enumerate() {
        let (cols, vals) = bt.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            dense[r * nc + col_map[j]] = v;
        }
    }
    let dense = DenseMatrix::from_row_major(rows.len(), nc, dense)?;
    let sigma_min = smallest_nonzero_singular_value(&dense, 1e-10)?;
    Ok(InfSupLevel {
        level,
        rows: rows.len(),
        cols: nc,
        sigma_min,
        min_lumped_velocity_mass: dv.iter().copied().fold(f64::INFINITY, f64::min),
        min_lumped_pressure_mass: dp.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Projects the fine masses through the stored transfers and probes every
/// level. `m_v` is the full (both components) velocity mass.
pub fn infsup_estimate(h: &Hierarchy, m_v: &SparseMatrix, m_p: &SparseMatrix) -> Result<InfSupReport> {
    let mut mv = m_v.clone();
    let mut mp = m_p.clone();
    let mut levels = Vec::new();
    for (l, level) in h.levels.iter().enumerate() {
        if mv.n_rows() != level.n_v || mp.n_rows() != level.n_p {
            return Err(Error::DimensionMismatch { op: "infsup_estimate", detail: "mass sizes do not match the level".into() });
        }
        levels.push(scaled_divergence_sigma(&level.divergence_block(), &mv, &mp, l)?);
        if let Some(t) = &level.transfer {
            let ns = t.p_v.n_rows();
            let nc = t.p_v.n_cols();
            let blk = |m: &SparseMatrix| {
                SparseMatrix::from_blocks(&[ns, ns], &[nc, nc], &[&[Some(m), None], &[None, Some(m)]])
            };
            let (pv, rv) = (blk(&t.p_v)?, blk(&t.r_v.transpose())?.transpose());
            mv = crate::sparse::triple_product(&rv, &mv, &pv)?;
            mp = crate::sparse::triple_product(&t.r_p, &mp, &t.p_p)?;
        }
    }
    Ok(InfSupReport { levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mac_structure() {
        let sys = build_mac1d(4).unwrap();
        let d = sys.b.to_dense();
        let rows: Vec<&[f64]> = (0..4).map(|i| d.row(i)).collect();
        assert_eq!(rows, vec![&[-1.0, 0.0, 0.0][..], &[1.0, -1.0, 0.0], &[0.0, 1.0, -1.0], &[0.0, 0.0, 1.0]]);
        let l = sys.b.matmul(&sys.b.transpose()).unwrap();
        assert_eq!(l.row(2).1, &[-1.0, 2.0, -1.0]);
        assert!(l.mul_vec(&[1.0; 4]).iter().all(|&v| v == 0.0));
        assert_eq!(sys.full_operator().shape(), (7, 7));
        assert!(build_mac1d(3).is_err());
    }

    #[test]
    fn colocated_placement_decouples_even_and_odd() {
        for n in [9, 13, 17, 21] {
            let sys = build_mac1d(n).unwrap();
            let (_, s_hat) = projected_mac_schur(&sys, VelocityPlacement::CoLocated).unwrap();
            for i in 2..s_hat.rows() - 2 {
                let stencil: Vec<f64> = (i - 2..=i + 2).map(|j| 4.0 * s_hat[(i, j)]).collect();
                assert_eq!(stencil, vec![-1.0, 0.0, 2.0, 0.0, -1.0], "n={n} row {i}");
            }
        }
    }

    #[test]
    fn eigenvector_oscillation_depends_on_placement() {
        let sys = build_mac1d(17).unwrap();
        let (s, _) = projected_mac_schur(&sys, VelocityPlacement::CoLocated).unwrap();
        assert!(sign_changes(&second_eigenvector(&s).unwrap().1) > 4);
        let (s, _) = projected_mac_schur(&sys, VelocityPlacement::MidPoint).unwrap();
        assert!(sign_changes(&second_eigenvector(&s).unwrap().1) <= 2);
    }

    #[test]
    fn schur_complements_have_constant_null_vector() {
        let sys = build_mac1d(17).unwrap();
        for placement in [VelocityPlacement::CoLocated, VelocityPlacement::MidPoint] {
            let (s, s_hat) = projected_mac_schur(&sys, placement).unwrap();
            for m in [&s, &s_hat] {
                let v = m.mul_vec(&vec![1.0; m.cols()]);
                assert!(v.iter().all(|x| x.abs() < 1e-12));
                let (vals, _) = symmetric_eigen(m).unwrap();
                assert!(vals[0] > -1e-12);
            }
        }
    }

    #[test]
    fn sign_change_count() {
        assert_eq!(sign_changes(&[1.0, -1.0, 1.0, 0.0, -1.0]), 3);
        assert_eq!(sign_changes(&[1.0, 2.0, 3.0]), 0);
    }

    #[test]
    fn identity_probe() {
        let id = SparseMatrix::identity(3);
        let l = scaled_divergence_sigma(&id, &id, &id, 0).unwrap();
        assert!((l.sigma_min - 1.0).abs() < 1e-14);
        let zero_mass = SparseMatrix::zeros(3, 3);
        assert!(matches!(scaled_divergence_sigma(&id, &id, &zero_mass, 2), Err(Error::NonPositiveLumpedMass { level: 2, row: 0 })));
    }
}
