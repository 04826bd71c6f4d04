//! Perturbative solution of Fokker-Planck equations with constant diffusion
//! and a weak drift potential `U = sum_n lambda^n U_n`.
//!
//! The density is written as `W = exp(-U / 2D) exp(S / D)` and the action
//! `S = sum_n lambda^n S_n` is solved order by order ([`hierarchy`]). Closed
//! forms for the linearly driven and Ornstein-Uhlenbeck drifts live in
//! [`oracles`]; [`reference`] holds a finite-difference solver and an
//! Euler-Maruyama simulator used to cross-check both.

pub mod analysis;
pub mod banded;
pub mod error;
pub mod hierarchy;
pub mod model;
pub mod oracles;
pub mod reference;
pub mod substream;
pub mod transform;

pub use error::{Error, Result};
pub use model::{
    validate_config, ActionExpansion, DensityField, DriftFamily, DriftSpec, Grid, GridParams, PotentialTerm, Quantity,
    RunConfig, ScalarField, ValidatedConfig, MAX_ORDER,
};
pub use oracles::ModulationV;
