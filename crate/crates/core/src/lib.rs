//! Generalized Nehari manifold solver for gradient elliptic systems
//! `-Δu_i = ∂_iF(u)` on multi-chamber planar domains.
//!
//! The crate discretizes the domain with node-centered finite differences,
//! minimizes the energy on the ground-state or multi-bump Nehari set by
//! retracted Sobolev-gradient descent, and provides the diagnostics that
//! certify a computed minimizer is a free critical point.

pub mod cli;
pub mod constraint;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod grid_domain;
pub mod io;
pub mod linalg;
pub mod solver;

pub use error::{Error, Result};
