//! Spectral-Galerkin laboratory for the strongly damped wave equation
//! `w_tt − Δw_t + σ(w)w_t − Δw + f(w) = g` on the box `(0, π)^d` with
//! homogeneous Dirichlet data.

pub mod attractor;
pub mod diagnostics;
pub mod dynamics;
pub mod model;
pub mod sampling;
pub mod spectral;

pub use dynamics::{SolverConfig, State};
pub use model::ModelSpec;
pub use spectral::{BasisSpec, GridField, MultiIndex, SpectralField};
