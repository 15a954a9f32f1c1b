//! Simulation and certification of two-phase compressible viscous flow on the
//! flat torus `[0,1)^2`.
//!
//! The crate is organised bottom-up:
//!
//! - [`rheology`]: convex dissipation potentials on symmetric 2x2 tensors, their
//!   conjugates, Moreau envelopes and proximal maps.
//! - [`thermo`]: barotropic pressure laws and pressure potentials.
//! - [`fields`]: periodic grid fields, spectral calculus and interpolation.
//! - [`flowmap`]: characteristics, semi-Lagrangian transport, renormalized residuals.
//! - [`interface`]: front-tracked marker curve, indicator rasterization and
//!   the curve-carried varifold.
//! - [`dynamics`]: the Galerkin momentum solver, time stepping and energy ledger.
//! - [`certify`]: residual checks of the weak solution clauses on a stored trajectory.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod certify;
pub mod dynamics;
mod error;
pub mod fields;
pub mod flowmap;
pub mod interface;
pub mod rheology;
pub mod thermo;
pub mod trajectory;

pub use error::{Error, Result};

/// A point on the torus (or a lifted point in the plane).
pub type Point = [f64; 2];
