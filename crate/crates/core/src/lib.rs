//! Survival and first-detection statistics of a particle hopping on a lattice
//! whose detector sites are projectively measured every `τ`.
//!
//! The exact stroboscopic dynamics live in [`dynamics`]; [`effective`] holds
//! the small-`τ` non-Hermitian approximation and its closed forms;
//! [`meanfield`] solves the complete graph exactly; [`absorbing`] evolves the
//! matching continuous-time model with an imaginary potential.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod absorbing;
pub mod analysis;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod lattice;
pub mod meanfield;
pub mod numerics;
pub mod series;
pub mod state;

pub use error::{Error, Result};
pub use lattice::{DetectorLayout, DetectorSet, Geometry, Hamiltonian, LatticeSpec, SquareCase};
pub use series::{SeriesRow, SurvivalSeries};
pub use state::StateVector;
