//! Element integrals for Q2 velocities and Q1 pressures on rectangles, and
//! global assembly with symmetric Dirichlet elimination.

use alloc::vec;
use alloc::vec::Vec;

use super::mesh::{Mesh, NodeTag, Q1_OFFSETS, Q2_OFFSETS};
use super::{BoundaryCondition, SaddleSystem};
use crate::{Result, SparseMatrix};

const GAUSS_PTS: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_WTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

fn quad1d(a: usize, t: f64) -> (f64, f64) {
    match a {
        0 => (0.5 * t * (t - 1.0), t - 0.5),
        1 => (1.0 - t * t, -2.0 * t),
        _ => (0.5 * t * (t + 1.0), t + 0.5),
    }
}

fn lin1d(a: usize, t: f64) -> (f64, f64) {
    if a == 0 {
        (0.5 * (1.0 - t), -0.5)
    } else {
        (0.5 * (1.0 + t), 0.5)
    }
}

/// Basis values and physical gradients at one quadrature point.
struct QuadPoint {
    weight: f64,
    phi: [f64; 9],
    dphi: [[f64; 2]; 9],
    psi: [f64; 4],
}

fn quadrature(h: [f64; 2]) -> Vec<QuadPoint> {
    let (jx, jy) = (0.5 * h[0], 0.5 * h[1]);
    let mut out = Vec::with_capacity(9);
    for (qj, &eta) in GAUSS_PTS.iter().enumerate() {
        for (qi, &xi) in GAUSS_PTS.iter().enumerate() {
            let mut phi = [0.0; 9];
            let mut dphi = [[0.0; 2]; 9];
            for (k, &(a, b)) in Q2_OFFSETS.iter().enumerate() {
                let (fa, da) = quad1d(a, xi);
                let (fb, db) = quad1d(b, eta);
                phi[k] = fa * fb;
                dphi[k] = [da * fb / jx, fa * db / jy];
            }
            let mut psi = [0.0; 4];
            for (k, &(a, b)) in Q1_OFFSETS.iter().enumerate() {
                psi[k] = lin1d(a / 2, xi).0 * lin1d(b / 2, eta).0;
            }
            out.push(QuadPoint { weight: GAUSS_WTS[qi] * GAUSS_WTS[qj] * jx * jy, phi, dphi, psi });
        }
    }
    out
}

/// Local Q2 stiffness matrix of one element.
pub fn element_stiffness(h: [f64; 2]) -> [[f64; 9]; 9] {
    let mut k = [[0.0; 9]; 9];
    for q in quadrature(h) {
        for i in 0..9 {
            for j in 0..9 {
                k[i][j] += q.weight * (q.dphi[i][0] * q.dphi[j][0] + q.dphi[i][1] * q.dphi[j][1]);
            }
        }
    }
    k
}

/// Local divergence blocks `(B_x, B_y)`, entries `∫ ψ_k ∂φ_i/∂x` and `∫ ψ_k ∂φ_i/∂y`.
pub fn element_divergence(h: [f64; 2]) -> ([[f64; 9]; 4], [[f64; 9]; 4]) {
    let mut bx = [[0.0; 9]; 4];
    let mut by = [[0.0; 9]; 4];
    for q in quadrature(h) {
        for k in 0..4 {
            for i in 0..9 {
                bx[k][i] += q.weight * q.psi[k] * q.dphi[i][0];
                by[k][i] += q.weight * q.psi[k] * q.dphi[i][1];
            }
        }
    }
    (bx, by)
}

pub fn element_q2_mass(h: [f64; 2]) -> [[f64; 9]; 9] {
    let mut m = [[0.0; 9]; 9];
    for q in quadrature(h) {
        for i in 0..9 {
            for j in 0..9 {
                m[i][j] += q.weight * q.phi[i] * q.phi[j];
            }
        }
    }
    m
}

pub fn element_q1_mass(h: [f64; 2]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for q in quadrature(h) {
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] += q.weight * q.psi[i] * q.psi[j];
            }
        }
    }
    m
}

/// Local convection matrix `∫ (w·∇φ_j) φ_i` for the Q2 velocity field with
/// nodal values `wx`, `wy`.
pub fn element_convection(h: [f64; 2], wx: &[f64; 9], wy: &[f64; 9]) -> [[f64; 9]; 9] {
    let mut c = [[0.0; 9]; 9];
    for q in quadrature(h) {
        let ux: f64 = (0..9).map(|k| wx[k] * q.phi[k]).sum();
        let uy: f64 = (0..9).map(|k| wy[k] * q.phi[k]).sum();
        for j in 0..9 {
            let adv = ux * q.dphi[j][0] + uy * q.dphi[j][1];
            for i in 0..9 {
                c[i][j] += q.weight * adv * q.phi[i];
            }
        }
    }
    c
}

fn scalar_q2_matrix(mesh: &Mesh, mut local: impl FnMut(usize) -> [[f64; 9]; 9]) -> SparseMatrix {
    let n = mesh.n_q2();
    let mut t = Vec::with_capacity(81 * mesh.elements.len());
    for (e, el) in mesh.elements.iter().enumerate() {
        let k = local(e);
        for i in 0..9 {
            for j in 0..9 {
                t.push((el.q2[i], el.q2[j], k[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("element node ids are in range")
}

/// Rounds quadrature noise to exact zeros while keeping the element pattern.
fn snap_relative(mut a: SparseMatrix) -> SparseMatrix {
    let tol = 1e-12 * a.max_abs();
    for v in a.values_mut() {
        if v.abs() <= tol {
            *v = 0.0;
        }
    }
    a
}

/// Scalar Q2 stiffness matrix without boundary conditions.
pub fn stiffness_matrix(mesh: &Mesh) -> SparseMatrix {
    let k = element_stiffness(mesh.h);
    snap_relative(scalar_q2_matrix(mesh, |_| k))
}

/// Scalar convection matrix for the velocity `u = [u_x; u_y]` (length `2 n_q2`).
pub fn convection_matrix(mesh: &Mesh, u: &[f64]) -> SparseMatrix {
    let n = mesh.n_q2();
    assert_eq!(u.len(), 2 * n, "velocity vector has wrong length");
    let m = scalar_q2_matrix(mesh, |e| {
        let el = &mesh.elements[e];
        let wx = el.q2.map(|v| u[v]);
        let wy = el.q2.map(|v| u[n + v]);
        element_convection(mesh.h, &wx, &wy)
    });
    snap_relative(m)
}

/// Divergence matrix `[B_x B_y]` of size `n_q1 × 2 n_q2`, no boundary conditions.
pub fn divergence_matrix(mesh: &Mesh) -> SparseMatrix {
    let n = mesh.n_q2();
    let (bx, by) = element_divergence(mesh.h);
    let mut t = Vec::with_capacity(72 * mesh.elements.len());
    for el in &mesh.elements {
        for k in 0..4 {
            for i in 0..9 {
                t.push((el.q1[k], el.q2[i], bx[k][i]));
                t.push((el.q1[k], n + el.q2[i], by[k][i]));
            }
        }
    }
    let b = SparseMatrix::from_triplets(mesh.n_q1(), 2 * n, &t).expect("element node ids are in range");
    snap_relative(b)
}

/// Consistent velocity (both components, block diagonal) and pressure mass
/// matrices.
pub fn assemble_mass_matrices(mesh: &Mesh) -> (SparseMatrix, SparseMatrix) {
    let mv = element_q2_mass(mesh.h);
    let scalar = scalar_q2_matrix(mesh, |_| mv);
    let n = mesh.n_q2();
    let mv_full = SparseMatrix::from_blocks(&[n, n], &[n, n], &[&[Some(&scalar), None], &[None, Some(&scalar)]])
        .expect("block sizes agree");
    let mp = element_q1_mass(mesh.h);
    let mut t = Vec::with_capacity(16 * mesh.elements.len());
    for el in &mesh.elements {
        for i in 0..4 {
            for j in 0..4 {
                t.push((el.q1[i], el.q1[j], mp[i][j]));
            }
        }
    }
    let mp_full = SparseMatrix::from_triplets(mesh.n_q1(), mesh.n_q1(), &t).expect("element node ids are in range");
    (mv_full, mp_full)
}

/// Turns a raw velocity block and divergence matrix into a saddle system by
/// replacing Dirichlet rows with identity rows and moving the eliminated
/// columns of `A` and `B` to the right-hand sides.
pub fn apply_dirichlet(mesh: &Mesh, bc: &BoundaryCondition, a: &SparseMatrix, b: &SparseMatrix) -> Result<SaddleSystem> {
    let n = mesh.n_q2();
    let nv = 2 * n;
    let mut fixed = vec![false; nv];
    let mut w = vec![0.0; nv];
    for v in 0..n {
        if let Some([wx, wy]) = bc.values[v] {
            fixed[v] = true;
            fixed[n + v] = true;
            w[v] = wx;
            w[n + v] = wy;
        }
    }
    let mut f_u = bc.forcing.clone().unwrap_or_else(|| vec![0.0; nv]);
    let mut f_p = vec![0.0; mesh.n_q1()];
    for (i, j, v) in a.triplets() {
        if !fixed[i] && fixed[j] {
            f_u[i] -= v * w[j];
        }
    }
    for (k, j, v) in b.triplets() {
        if fixed[j] {
            f_p[k] -= v * w[j];
        }
    }
    let mut a = a.filter(|i, j, _| !fixed[i] && !fixed[j]);
    let ident: Vec<f64> = fixed.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
    a = a.add(1.0, &SparseMatrix::from_diagonal(&ident), 1.0)?;
    for i in 0..nv {
        if fixed[i] {
            f_u[i] = w[i];
        }
    }
    let b = b.filter(|_, j, _| !fixed[j]);
    Ok(SaddleSystem {
        a,
        b,
        f_u,
        f_p,
        colocation: mesh.colocation.clone(),
        pressure_nullspace: mesh.is_enclosed(),
        dirichlet: fixed,
    })
}

/// Stokes system `[[A_S, Bᵀ], [B, 0]]` with boundary conditions applied.
pub fn assemble_stokes(mesh: &Mesh, bc: &BoundaryCondition) -> Result<SaddleSystem> {
    assemble_oseen(mesh, bc, 1.0, None)
}

/// Oseen system with `A = ν A_S + blockdiag(K̂, K̂)`, where `K̂` is built from
/// the current velocity (no convection when `u_current` is `None`).
pub fn assemble_oseen(mesh: &Mesh, bc: &BoundaryCondition, nu: f64, u_current: Option<&[f64]>) -> Result<SaddleSystem> {
    let n = mesh.n_q2();
    let mut scalar = stiffness_matrix(mesh).scaled(nu);
    if let Some(u) = u_current {
        scalar = scalar.add(1.0, &convection_matrix(mesh, u), 1.0)?;
    }
    let a = SparseMatrix::from_blocks(&[n, n], &[n, n], &[&[Some(&scalar), None], &[None, Some(&scalar)]])?;
    apply_dirichlet(mesh, bc, &a, &divergence_matrix(mesh))
}

/// Dirichlet data for the standard problems: leaky lid, parabolic inflow on
/// the step and obstacle channels, no-slip elsewhere.
pub fn default_boundary_condition(mesh: &Mesh, domain: &super::Domain) -> BoundaryCondition {
    let values = mesh
        .q2_coords
        .iter()
        .zip(&mesh.q2_tags)
        .map(|(c, tag)| {
            if *tag != NodeTag::Dirichlet {
                return None;
            }
            let [x, y] = *c;
            let ux = match domain {
                super::Domain::LidCavity => {
                    if y == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                super::Domain::BackwardStep { .. } => {
                    if x == -1.0 && y >= 0.0 {
                        4.0 * y * (1.0 - y)
                    } else {
                        0.0
                    }
                }
                super::Domain::Obstacle { .. } => {
                    if x == 0.0 {
                        1.0 - y * y
                    } else {
                        0.0
                    }
                }
            };
            Some([ux, 0.0])
        })
        .collect();
    BoundaryCondition { values, forcing: None }
}

#[cfg(test)]
mod tests {
    use super::super::mesh::build_mesh;
    use super::super::ProblemSpec;
    use super::*;
    use crate::dense::symmetric_eigen;

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let k = element_stiffness([1.0, 1.0]);
        for row in &k {
            assert!(row.iter().sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn unit_q1_mass_matches_exact_integrals() {
        let m = element_q1_mass([1.0, 1.0]);
        let exact = [[4.0, 2.0, 1.0, 2.0], [2.0, 4.0, 2.0, 1.0], [1.0, 2.0, 4.0, 2.0], [2.0, 1.0, 2.0, 4.0]];
        for i in 0..4 {
            for j in 0..4 {
                assert!((m[i][j] - exact[i][j] / 36.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_row_sums_give_area() {
        let mesh = build_mesh(&ProblemSpec::lid_cavity(4)).unwrap();
        let (mv, mp) = assemble_mass_matrices(&mesh);
        assert!((mp.row_sums().iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert!((mv.row_sums().iter().sum::<f64>() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn cavity_velocity_block_is_spd() {
        let mesh = build_mesh(&ProblemSpec::lid_cavity(4)).unwrap();
        let bc = default_boundary_condition(&mesh, &super::super::Domain::LidCavity);
        let sys = assemble_stokes(&mesh, &bc).unwrap();
        assert!(sys.a.symmetry_defect() < 1e-14);
        let (vals, _) = symmetric_eigen(&sys.a.to_dense()).unwrap();
        assert!(vals[0] > 0.0);
    }

    #[test]
    fn zero_convection_for_constant_field_row_sums() {
        let mesh = build_mesh(&ProblemSpec::lid_cavity(4)).unwrap();
        let n = mesh.n_q2();
        let mut u = vec![0.0; 2 * n];
        u[..n].iter_mut().for_each(|v| *v = 1.0);
        let k = convection_matrix(&mesh, &u);
        for (i, s) in k.row_sums().iter().enumerate() {
            if mesh.q2_tags[i] == NodeTag::Interior {
                assert!(s.abs() < 1e-13);
            }
        }
    }
}
