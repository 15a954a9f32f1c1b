//! Convex dissipation potentials on symmetric 2x2 tensors.

mod mixture;
mod potential;
mod tensor;

pub use mixture::{ComparabilityReport, MixturePotential, Phase};
pub use potential::{DissipationPotential, ProxResult, NEWTON_MAX_ITER, NEWTON_TOL};
pub use tensor::SymTensor2;
