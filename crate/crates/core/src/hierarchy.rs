//! Multilevel setup and V-cycle for monolithic saddle-point AMG.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::coarsen::{
    find_coarse_pressures, find_velocity_cpoints, form_aux_blocks, pressure_pattern, velocity_pattern_scalar,
    CoarsenParams,
};
use crate::direct::BandedLu;
use crate::emin::{emin_iterate, emin_restriction, initial_prolongator, EminNorm, EminProblem};
use crate::fem::{LinearSolver, Mesh, SaddleSystem};
use crate::graph::Graph;
use crate::krylov::{gmres, GmresOutcome, GmresParams};
use crate::smoothers::{Smoother, SmootherKind, Vanka};
use crate::sparse::triple_product;
use crate::{Error, Result, SparseMatrix};

/// How grid transfers are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferMode {
    /// EMIN in the energy norms of the velocity block and `BBᵀ`, and `R = Pᵀ`.
    Symmetric,
    /// EMIN in the normal-equations norm and a separately minimized `R`.
    PetrovGalerkin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyParams {
    pub coarsen: CoarsenParams,
    pub mode: TransferMode,
    pub emin_iterations: usize,
    /// Stop coarsening once a level has at most this many dofs.
    pub coarse_threshold: usize,
    pub max_levels: usize,
    pub smoother: SmootherKind,
    pub pre_smooth: usize,
    pub post_smooth: usize,
    pub coarse_vanka_sweeps: usize,
    pub coarse_vanka_omega: f64,
}

impl Default for HierarchyParams {
    fn default() -> Self {
        Self {
            coarsen: CoarsenParams::default(),
            mode: TransferMode::Symmetric,
            emin_iterations: 1,
            coarse_threshold: 250,
            max_levels: 10,
            smoother: SmootherKind::vanka(),
            pre_smooth: 1,
            post_smooth: 1,
            coarse_vanka_sweeps: 20,
            coarse_vanka_omega: 0.5,
        }
    }
}

impl HierarchyParams {
    pub fn with_smoother(mut self, kind: SmootherKind, pre: usize, post: usize) -> Self {
        self.smoother = kind;
        self.pre_smooth = pre;
        self.post_smooth = post;
        self
    }

    pub fn navier_stokes(mut self) -> Self {
        self.mode = TransferMode::PetrovGalerkin;
        self
    }
}

/// Grid transfers from one level to the next. The scalar velocity blocks act
/// on each velocity component.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub p: SparseMatrix,
    pub r: SparseMatrix,
    pub p_v: SparseMatrix,
    pub r_v: SparseMatrix,
    pub p_p: SparseMatrix,
    pub r_p: SparseMatrix,
    /// Fine pressures kept on the coarse level, in coarse order.
    pub pressure_c_points: Vec<usize>,
    /// Fine scalar velocity nodes kept on the coarse level, in coarse order.
    pub velocity_c_nodes: Vec<usize>,
}

/// Coarsening statistics of one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CoarseningStats {
    pub pressure_c_points: usize,
    pub extra_c_points: usize,
    pub midpoints: usize,
    pub augmented_velocities: usize,
}

#[derive(Debug, Clone)]
pub struct Level {
    /// Full saddle operator, velocities (x then y) first.
    pub k: SparseMatrix,
    /// Number of velocity dofs (both components).
    pub n_v: usize,
    pub n_p: usize,
    pub coords_v: Vec<[f64; 2]>,
    pub coords_p: Vec<[f64; 2]>,
    /// Scalar velocity node at the position of each pressure, if any.
    pub colocation: Vec<Option<usize>>,
    /// Scalar velocity nodes left out of coarsening (decoupled rows).
    pub excluded: Vec<bool>,
    pub transfer: Option<Transfer>,
    pub smoother: Option<Smoother>,
    pub stats: CoarseningStats,
}

impl Level {
    pub fn n_dofs(&self) -> usize {
        self.n_v + self.n_p
    }

    pub fn velocity_block(&self) -> SparseMatrix {
        self.k.block(0..self.n_v, 0..self.n_v)
    }

    pub fn divergence_block(&self) -> SparseMatrix {
        self.k.block(self.n_v..self.n_dofs(), 0..self.n_v)
    }
}

#[derive(Debug, Clone)]
enum CoarseSolver {
    Vanka(Vanka, usize),
    Direct(BandedLu),
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
    pub params: HierarchyParams,
    pub pressure_nullspace: bool,
    coarse: CoarseSolver,
}

/// Fine-level input for [`setup_hierarchy_from_parts`].
#[derive(Debug, Clone)]
pub struct FineLevel {
    pub k: SparseMatrix,
    pub n_v: usize,
    pub coords_v: Vec<[f64; 2]>,
    pub coords_p: Vec<[f64; 2]>,
    pub colocation: Vec<Option<usize>>,
    /// Extra scalar velocity nodes to exclude (e.g. Dirichlet nodes).
    pub excluded: Vec<bool>,
    pub pressure_nullspace: bool,
}

/// Scalar velocity nodes whose rows (both components) hold only a diagonal
/// and whose divergence columns are empty.
pub fn decoupled_velocity_nodes(k: &SparseMatrix, n_v: usize) -> Vec<bool> {
    let ns = n_v / 2;
    let mut coupled = vec![false; n_v];
    for i in 0..k.n_rows() {
        let (cols, vals) = k.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if v == 0.0 || i == j {
                continue;
            }
            if i < n_v && j < n_v {
                coupled[i] = true;
            }
            if i >= n_v && j < n_v {
                coupled[j] = true;
            }
            if i < n_v && j >= n_v {
                coupled[i] = true;
            }
        }
    }
    (0..ns).map(|v| !coupled[v] && !coupled[ns + v]).collect()
}

impl FineLevel {
    /// Fine level of an assembled system with the given node coordinates.
    /// Velocity nodes with Dirichlet rows in both components are excluded.
    pub fn from_system(sys: &SaddleSystem, coords_v: Vec<[f64; 2]>, coords_p: Vec<[f64; 2]>) -> Result<Self> {
        sys.validate()?;
        let ns = sys.n_velocity() / 2;
        Ok(FineLevel {
            k: sys.full_operator(),
            n_v: sys.n_velocity(),
            coords_v,
            coords_p,
            colocation: sys.colocation.iter().map(|&c| Some(c)).collect(),
            excluded: (0..ns).map(|v| sys.dirichlet[v] && sys.dirichlet[ns + v]).collect(),
            pressure_nullspace: sys.pressure_nullspace,
        })
    }
}

/// Builds the hierarchy for an assembled system on `mesh`.
pub fn setup_hierarchy(sys: &SaddleSystem, mesh: &Mesh, params: &HierarchyParams) -> Result<Hierarchy> {
    setup_hierarchy_from_parts(FineLevel::from_system(sys, mesh.q2_coords.clone(), mesh.q1_coords.clone())?, params)
}

pub fn setup_hierarchy_from_parts(fine: FineLevel, params: &HierarchyParams) -> Result<Hierarchy> {
    let n_p = fine.k.n_rows() - fine.n_v;
    if fine.coords_v.len() * 2 != fine.n_v || fine.coords_p.len() != n_p || fine.colocation.len() != n_p {
        return Err(Error::DimensionMismatch { op: "setup_hierarchy", detail: "coordinates do not match the operator".into() });
    }
    let mut excluded = decoupled_velocity_nodes(&fine.k, fine.n_v);
    for (e, &x) in excluded.iter_mut().zip(&fine.excluded) {
        *e |= x;
    }
    let mut levels = vec![Level {
        k: fine.k,
        n_v: fine.n_v,
        n_p,
        coords_v: fine.coords_v,
        coords_p: fine.coords_p,
        colocation: fine.colocation,
        excluded,
        transfer: None,
        smoother: None,
        stats: CoarseningStats::default(),
    }];
    while levels.len() < params.max_levels.max(1) {
        let level = levels.last_mut().expect("at least one level");
        if level.n_dofs() <= params.coarse_threshold || level.n_p == 0 {
            break;
        }
        let Some((transfer, coarse, stats)) = coarsen_level(level, params)? else {
            log::warn!("coarsening stagnated at level {}", levels.len() - 1);
            break;
        };
        level.transfer = Some(transfer);
        level.stats = stats;
        levels.push(coarse);
    }
    let last = levels.len() - 1;
    for level in &mut levels[..last] {
        level.smoother = Some(Smoother::new(params.smoother, &level.k, level.n_v)?);
    }
    let coarsest = &levels[last];
    let coarse = if fine.pressure_nullspace {
        CoarseSolver::Vanka(Vanka::new(&coarsest.k, coarsest.n_v, params.coarse_vanka_omega)?, params.coarse_vanka_sweeps)
    } else {
        CoarseSolver::Direct(BandedLu::factor(&coarsest.k)?)
    };
    Ok(Hierarchy { levels, params: *params, pressure_nullspace: fine.pressure_nullspace, coarse })
}

fn block_diag3(v: &SparseMatrix, p: &SparseMatrix) -> Result<SparseMatrix> {
    let (rv, cv) = v.shape();
    let (rp, cp) = p.shape();
    SparseMatrix::from_blocks(
        &[rv, rv, rp],
        &[cv, cv, cp],
        &[&[Some(v), None, None], &[None, Some(v), None], &[None, None, Some(p)]],
    )
}

fn emin_block(
    aux: &SparseMatrix,
    pattern: &SparseMatrix,
    excluded: Option<&[bool]>,
    params: &HierarchyParams,
) -> Result<(SparseMatrix, SparseMatrix)> {
    let p0 = initial_prolongator(pattern, excluded)?;
    let norm = match params.mode {
        TransferMode::Symmetric => EminNorm::ANorm,
        TransferMode::PetrovGalerkin => EminNorm::NormalNorm,
    };
    let p = emin_iterate(&EminProblem::new(aux, pattern, norm, params.emin_iterations)?, &p0)?;
    let r = match params.mode {
        TransferMode::Symmetric => p.transpose(),
        TransferMode::PetrovGalerkin => emin_restriction(aux, &p, params.emin_iterations, excluded)?,
    };
    Ok((p, r))
}

fn coarsen_level(level: &Level, params: &HierarchyParams) -> Result<Option<(Transfer, Level, CoarseningStats)>> {
    let ns = level.n_v / 2;
    let aux = form_aux_blocks(&level.velocity_block(), &level.divergence_block(), &params.coarsen)?;
    let (split, _) = find_coarse_pressures(&aux.a_p, &level.coords_p, &params.coarsen)?;
    if split.n_coarse() == level.n_p {
        return Ok(None);
    }
    let vgraph = Graph::from_matrix(&aux.a_v);
    let vc = find_velocity_cpoints(&split, &level.coords_p, &level.colocation, &level.excluded, &vgraph, &params.coarsen)?;
    let nc = 2 * vc.c_nodes.len() + split.n_coarse();
    if nc >= level.n_dofs() {
        return Ok(None);
    }
    let pat_p = pressure_pattern(&split)?;
    let pat_v = velocity_pattern_scalar(&vgraph, &vc.c_nodes, &level.excluded)?;
    let a_vv = level.velocity_block();
    let energy_v = a_vv.block(0..ns, 0..ns);
    let div = level.divergence_block();
    let energy_p = div.matmul(&div.transpose())?;
    let (p_p, r_p) = emin_block(&energy_p, &pat_p, None, params)?;
    let (p_v, r_v) = emin_block(&energy_v, &pat_v, Some(&level.excluded), params)?;
    let p = block_diag3(&p_v, &p_p)?;
    let r = block_diag3(&r_v, &r_p)?;
    let k = triple_product(&r, &level.k, &p)?;
    let coords_v = project_coordinates(&level.coords_v, &vc.c_nodes);
    let coords_p = project_coordinates(&level.coords_p, &split.c_points);
    let colocation = split
        .c_points
        .iter()
        .map(|&c| level.colocation[c].and_then(|v| vc.c_nodes.binary_search(&v).ok()))
        .collect();
    let n_v = 2 * vc.c_nodes.len();
    debug_assert!(ns >= vc.c_nodes.len());
    let excluded = decoupled_velocity_nodes(&k, n_v);
    let stats = CoarseningStats {
        pressure_c_points: split.n_coarse(),
        extra_c_points: split.n_extra,
        midpoints: vc.n_midpoints,
        augmented_velocities: vc.n_augmented,
    };
    let coarse = Level {
        k,
        n_v,
        n_p: split.n_coarse(),
        coords_v,
        coords_p,
        colocation,
        excluded,
        transfer: None,
        smoother: None,
        stats: CoarseningStats::default(),
    };
    let transfer = Transfer {
        p,
        r,
        p_v,
        r_v,
        p_p,
        r_p,
        pressure_c_points: split.c_points,
        velocity_c_nodes: vc.c_nodes,
    };
    Ok(Some((transfer, coarse, stats)))
}

/// Coarse coordinates by injection.
pub fn project_coordinates(coords: &[[f64; 2]], c_points: &[usize]) -> Vec<[f64; 2]> {
    c_points.iter().map(|&c| coords[c]).collect()
}

/// One row of the hierarchy report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub nnz: usize,
    /// Dofs of this level divided by dofs of the previous level.
    pub coarsening_ratio: Option<f64>,
}

impl Hierarchy {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn operator_complexity(&self) -> f64 {
        let fine = self.levels[0].k.nnz() as f64;
        self.levels.iter().map(|l| l.k.nnz() as f64).sum::<f64>() / fine
    }

    pub fn summary(&self) -> Vec<LevelSummary> {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, l)| LevelSummary {
                level: i,
                n_velocity: l.n_v,
                n_pressure: l.n_p,
                nnz: l.k.nnz(),
                coarsening_ratio: (i > 0).then(|| l.n_dofs() as f64 / self.levels[i - 1].n_dofs() as f64),
            })
            .collect()
    }

    /// Plain-text report with one row per level.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>5} {:>9} {:>9} {:>10} {:>7}", "level", "velocity", "pressure", "nnz", "ratio");
        for row in self.summary() {
            let ratio = row.coarsening_ratio.map_or(String::from("-"), |r| alloc::format!("{r:.3}"));
            let _ = writeln!(s, "{:>5} {:>9} {:>9} {:>10} {:>7}", row.level, row.n_velocity, row.n_pressure, row.nnz, ratio);
        }
        let _ = writeln!(s, "operator complexity {:.3}", self.operator_complexity());
        s
    }

    /// Applies one V-cycle to `x` in place.
    pub fn vcycle(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        self.cycle(0, b, x)
    }

    /// One V-cycle from a zero initial guess.
    pub fn apply(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; b.len()];
        self.cycle(0, b, &mut x)?;
        Ok(x)
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) -> Result<()> {
        let level = &self.levels[l];
        let Some(transfer) = &level.transfer else {
            match &self.coarse {
                CoarseSolver::Vanka(v, sweeps) => {
                    for _ in 0..*sweeps {
                        v.sweep(&level.k, x, b);
                    }
                }
                CoarseSolver::Direct(lu) => {
                    let r = level.k.residual(x, b);
                    let e = lu.solve(&r);
                    x.iter_mut().zip(e).for_each(|(x, e)| *x += e);
                }
            }
            return Ok(());
        };
        let smoother = level.smoother.as_ref().expect("non-coarsest levels carry a smoother");
        smoother.smooth(&level.k, x, b, self.params.pre_smooth)?;
        let r = level.k.residual(x, b);
        let rc = transfer.r.mul_vec(&r);
        let mut ec = vec![0.0; rc.len()];
        self.cycle(l + 1, &rc, &mut ec)?;
        let e = transfer.p.mul_vec(&ec);
        x.iter_mut().zip(e).for_each(|(x, e)| *x += e);
        smoother.smooth(&level.k, x, b, self.params.post_smooth)
    }

    /// GMRES on the finest operator preconditioned by one V-cycle.
    pub fn solve(&self, b: &[f64], x0: &[f64], gmres_params: &GmresParams) -> Result<GmresOutcome> {
        let k = &self.levels[0].k;
        gmres(&mut |x| k.mul_vec(x), &mut |r| self.apply(r), b, x0, gmres_params)
    }
}

/// AMG-preconditioned GMRES behind the [`LinearSolver`] interface. A new
/// hierarchy is built for every system.
#[derive(Debug, Clone)]
pub struct AmgSolver {
    pub mesh: Mesh,
    pub params: HierarchyParams,
    pub gmres: GmresParams,
    /// Outcome of the most recent solve.
    pub last: Option<GmresOutcome>,
    /// When set, failure to reach the tolerance is an error.
    pub require_convergence: bool,
}

impl AmgSolver {
    pub fn new(mesh: Mesh, params: HierarchyParams, gmres: GmresParams) -> Self {
        Self { mesh, params, gmres, last: None, require_convergence: false }
    }
}

impl LinearSolver for AmgSolver {
    fn solve(&mut self, sys: &SaddleSystem) -> Result<Vec<f64>> {
        let h = setup_hierarchy(sys, &self.mesh, &self.params)?;
        let out = h.solve(&sys.rhs(), &vec![0.0; sys.n_dofs()], &self.gmres)?;
        if self.require_convergence && !out.converged {
            return Err(Error::InvalidProblem(alloc::format!(
                "GMRES stopped after {} iterations at relative residual {:.2e}",
                out.iterations,
                out.relative_residual
            )));
        }
        let x = out.x.clone();
        self.last = Some(out);
        Ok(x)
    }
}
