//! Spectral and Monte Carlo tools for Lévy-driven affine flows and the
//! distribution-valued equations they generate.

pub mod cli;
pub mod error;
pub mod hermite_basis;
pub mod levy_sde;
pub mod monotonicity;
pub mod par;
pub mod schwartz_ops;
pub mod spde_solver;

pub use error::{Error, Result};
