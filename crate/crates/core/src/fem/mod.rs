//! Q2-Q1 (Taylor-Hood) discretization of Stokes and Oseen problems on
//! structured quadrilateral meshes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, SparseMatrix};

pub mod assembly;
pub mod mesh;
pub mod picard;

pub use assembly::{
    apply_dirichlet, assemble_mass_matrices, assemble_oseen, assemble_stokes, convection_matrix,
    default_boundary_condition, divergence_matrix, stiffness_matrix,
};
pub use mesh::{build_mesh, Element, Mesh, NodeTag};
pub use picard::{picard_solve, DirectSolver, LinearSolver, PicardOutcome};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `(-1,1)²` with a leaky moving lid.
    LidCavity,
    /// `(-1,L)×(-1,1)` minus the lower-left quadrant `(-1,0)×(-1,0)`.
    BackwardStep { length: f64 },
    /// `(0,L)×(-1,1)` minus the rectangle `[x0,x1]×[y0,y1]`.
    Obstacle { length: f64, obstacle: [f64; 4] },
}

/// Characteristic scales used to quote a Reynolds number. Informational only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReynoldsMeta {
    pub velocity: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub domain: Domain,
    /// Number of elements across a length of two.
    pub refinement: usize,
    pub viscosity: f64,
    pub reynolds: Option<ReynoldsMeta>,
}

pub const DEFAULT_OBSTACLE: [f64; 4] = [1.75, 2.25, -0.25, 0.25];

impl ProblemSpec {
    pub fn lid_cavity(m: usize) -> Self {
        Self { domain: Domain::LidCavity, refinement: m, viscosity: 1.0, reynolds: None }
    }

    pub fn backward_step(m: usize, viscosity: f64, length: f64) -> Self {
        Self { domain: Domain::BackwardStep { length }, refinement: m, viscosity, reynolds: None }
    }

    pub fn obstacle(m: usize, viscosity: f64) -> Self {
        Self {
            domain: Domain::Obstacle { length: 8.0, obstacle: DEFAULT_OBSTACLE },
            refinement: m,
            viscosity,
            reynolds: None,
        }
    }

    pub fn with_viscosity(mut self, nu: f64) -> Self {
        self.viscosity = nu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.viscosity > 0.0) {
            return Err(Error::InvalidProblem(format!("viscosity must be positive, got {}", self.viscosity)));
        }
        if self.refinement == 0 {
            return Err(Error::InvalidProblem("refinement must be at least 1".into()));
        }
        match self.domain {
            Domain::BackwardStep { length } | Domain::Obstacle { length, .. } if !(length > 0.0) => {
                Err(Error::InvalidProblem(format!("channel length must be positive, got {length}")))
            }
            _ => Ok(()),
        }
    }

    /// `U L / ν` when characteristic scales are attached.
    pub fn reynolds_number(&self) -> Option<f64> {
        self.reynolds.map(|r| r.velocity * r.length / self.viscosity)
    }
}

/// Prescribed velocities per Q2 node (`None` for free nodes) and an optional
/// momentum forcing vector. Natural boundary data is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    pub values: Vec<Option<[f64; 2]>>,
    pub forcing: Option<Vec<f64>>,
}

/// `[[A, Bᵀ], [B, 0]] [u; p] = [f_u; f_p]` with velocities ordered x then y.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub f_u: Vec<f64>,
    pub f_p: Vec<f64>,
    /// Scalar velocity node sharing the position of each pressure node.
    pub colocation: Vec<usize>,
    /// Pressure is only defined up to a constant.
    pub pressure_nullspace: bool,
    /// Velocity dofs carrying a Dirichlet identity row.
    pub dirichlet: Vec<bool>,
}

impl SaddleSystem {
    pub fn n_velocity(&self) -> usize {
        self.a.n_rows()
    }

    pub fn n_pressure(&self) -> usize {
        self.b.n_rows()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_velocity() + self.n_pressure()
    }

    pub fn full_operator(&self) -> SparseMatrix {
        let (nv, np) = (self.n_velocity(), self.n_pressure());
        let bt = self.b.transpose();
        SparseMatrix::from_blocks(&[nv, np], &[nv, np], &[&[Some(&self.a), Some(&bt)], &[Some(&self.b), None]])
            .expect("saddle blocks are conformal")
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.f_u.clone();
        r.extend_from_slice(&self.f_p);
        r
    }

    /// Checks block shapes and the co-location map.
    pub fn validate(&self) -> Result<()> {
        let (nv, np) = (self.n_velocity(), self.n_pressure());
        if self.a.n_cols() != nv || self.b.n_cols() != nv || self.f_u.len() != nv || self.f_p.len() != np {
            return Err(Error::DimensionMismatch {
                op: "saddle system",
                detail: format!("A {:?}, B {:?}, f_u {}, f_p {}", self.a.shape(), self.b.shape(), self.f_u.len(), self.f_p.len()),
            });
        }
        if nv % 2 != 0 || self.colocation.len() != np || self.colocation.iter().any(|&c| c >= nv / 2) {
            return Err(Error::InvalidStructure("co-location map does not match the blocks".into()));
        }
        if self.dirichlet.len() != nv {
            return Err(Error::InvalidStructure("dirichlet mask has wrong length".into()));
        }
        Ok(())
    }
}

/// Convenience: mesh, boundary data and the Stokes system for a problem.
pub fn stokes_problem(spec: &ProblemSpec) -> Result<(Mesh, SaddleSystem)> {
    let mesh = build_mesh(spec)?;
    let bc = default_boundary_condition(&mesh, &spec.domain);
    let sys = assemble_stokes(&mesh, &bc)?;
    Ok((mesh, sys))
}

/// Nodal interpolant of a velocity field, laid out as `[u_x; u_y]`.
pub fn interpolate_velocity(mesh: &Mesh, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
    let n = mesh.n_q2();
    let mut u = vec![0.0; 2 * n];
    for (v, c) in mesh.q2_coords.iter().enumerate() {
        let [a, b] = f(c[0], c[1]);
        u[v] = a;
        u[n + v] = b;
    }
    u
}
