//! Nonlinear paraxial beam propagation for optical and atomic beams.
//!
//! The generic equation
//!
//! ```text
//! 2ik ∂ψ/∂u = −ε Δ⊥ψ + γ|ψ|²ψ + ε k² α²(u) r² ψ
//! ```
//!
//! is solved directly ([`solver`]) and through its exact second-moment laws
//! ([`moments`], [`abcd`]), so each law can be checked against the other.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abcd;
pub mod cli;
pub mod error;
pub mod longitudinal;
pub mod moments;
pub mod params;
pub mod profile;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
pub use params::{Epsilon, ParaxialParams};
pub use profile::Profile;
pub use solver::field::{GaussianBeam, TransverseField};
pub use solver::GridSpec;
