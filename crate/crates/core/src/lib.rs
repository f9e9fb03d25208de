//! Discrete Hamiltonian gauge theory on cell complexes with boundary.
//!
//! The crate builds finite-dimensional models of gauge theories on meshes with
//! boundary and checks, by explicit linear algebra, how the momentum map
//! splits into a bulk constraint and a boundary flux, how the constraint
//! gauge ideal and its reduction behave, and how the boundary (corner) data
//! carries a Poisson structure with its BRST description.

pub mod cli;
pub mod complex;
pub mod corner;
pub mod error;
pub mod hodge;
pub mod linalg;
pub mod models;
pub mod phasespace;
pub mod reduction;
pub mod liealg;
pub mod par;
pub mod rng;
pub mod tol;

pub use error::{Error, Result};
