//! Kuramoto oscillators with Hebbian adaptive coupling on arbitrary graphs.
//!
//! * [`graph`]: simple undirected graphs, weighted incidence and Laplacian matrices.
//! * [`model`]: vector fields (classical, Hebbian, general interaction), energy, diagnostics.
//! * [`dynamics`]: RK4 / Dormand-Prince integration, trajectories, lock detection.
//! * [`equilibria`]: phase-locked fixed points via the double-angle equation.
//! * [`spectral`]: block Jacobian, Schur-complement reduction, inertia, stability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod graph;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
