//! Picard iteration for the steady Navier-Stokes equations.

use alloc::vec::Vec;

use super::{assemble_oseen, build_mesh, default_boundary_condition, Mesh, ProblemSpec, SaddleSystem};
use crate::direct::BandedLu;
use crate::math::norm2;
use crate::{Error, Result};

/// Solves a full saddle system `[[A, Bᵀ], [B, 0]] x = [f_u; f_p]`.
pub trait LinearSolver {
    fn solve(&mut self, sys: &SaddleSystem) -> Result<Vec<f64>>;
}

/// Banded LU on the reordered full operator. When the pressure is only
/// determined up to a constant, the last pressure equation is replaced by
/// `p_last = 0`.
#[derive(Debug, Default, Clone, Copy)]
pub struct DirectSolver;

impl LinearSolver for DirectSolver {
    fn solve(&mut self, sys: &SaddleSystem) -> Result<Vec<f64>> {
        let mut k = sys.full_operator();
        let mut rhs = sys.rhs();
        if sys.pressure_nullspace && sys.n_pressure() > 0 {
            let pin = sys.n_dofs() - 1;
            let mut t: Vec<_> = k.triplets().filter(|&(i, _, _)| i != pin).collect();
            t.push((pin, pin, 1.0));
            k = crate::SparseMatrix::from_triplets(k.n_rows(), k.n_cols(), &t)?;
            rhs[pin] = 0.0;
        }
        Ok(BandedLu::factor(&k)?.solve(&rhs))
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub mesh: Mesh,
    /// The last assembled Oseen system.
    pub system: SaddleSystem,
    pub solution: Vec<f64>,
    /// Nonlinear residual 2-norms, one per assembled Oseen system.
    pub history: Vec<f64>,
}

/// Runs Picard iterations from the Stokes solution until the nonlinear
/// residual `‖b(u) - A(u) x‖₂` drops below `nl_tol`.
pub fn picard_solve(
    spec: &ProblemSpec,
    solver: &mut dyn LinearSolver,
    nl_tol: f64,
    max_picard: usize,
) -> Result<PicardOutcome> {
    if !(nl_tol > 0.0) {
        return Err(Error::InvalidProblem("nonlinear tolerance must be positive".into()));
    }
    let mesh = build_mesh(spec)?;
    let bc = default_boundary_condition(&mesh, &spec.domain);
    let nu = spec.viscosity;
    let stokes = assemble_oseen(&mesh, &bc, nu, None)?;
    let mut x = solver.solve(&stokes)?;
    let nv = stokes.n_velocity();
    let mut history = Vec::new();
    loop {
        let sys = assemble_oseen(&mesh, &bc, nu, Some(&x[..nv]))?;
        let r = sys.full_operator().residual(&x, &sys.rhs());
        let res = norm2(&r);
        history.push(res);
        log::debug!("picard step {}: residual {res:.3e}", history.len() - 1);
        if res < nl_tol {
            return Ok(PicardOutcome { mesh, system: sys, solution: x, history });
        }
        if history.len() > max_picard {
            return Err(Error::PicardNotConverged { history });
        }
        x = solver.solve(&sys)?;
    }
}
