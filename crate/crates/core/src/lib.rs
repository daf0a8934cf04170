//! Numerical laboratory for the energy-critical nonlinear heat equation
//! `∂ₜu = Δu + |u|^{4/(d-2)} u` on ℝ^d, d ≥ 3, restricted to radial data.

pub mod config;
pub mod decay_character;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod families;
pub mod functionals;
pub mod ground_state;
pub mod quadrature;
pub mod radial;
pub mod special;

pub use error::{Error, Result};
