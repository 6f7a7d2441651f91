//! Monolithic algebraic multigrid for Q2-Q1 mixed discretizations of Stokes
//! and Picard-linearized Navier-Stokes (Oseen) saddle-point systems.
//!
//! The pressure unknowns are coarsened first with a distance-four greedy
//! splitting on a filtered pressure-Poisson graph. Coarse velocities are then
//! chosen so that every coarse pressure keeps a co-located coarse velocity and
//! approximate mid-points are added between coarse pressures, which mimics the
//! Q2-Q1 layout on every level. Grid transfer weights come from a constrained
//! energy minimization over the resulting sparsity patterns.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the experiment driver live in the companion CLI crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod coarsen;
pub mod dense;
pub mod diagnostics;
pub mod direct;
pub mod emin;
mod error;
pub mod fem;
pub mod graph;
pub mod hierarchy;
pub mod io;
pub mod krylov;
pub(crate) mod math;
pub mod smoothers;
pub mod sparse;

pub use error::{Error, Result};
pub use sparse::SparseMatrix;
