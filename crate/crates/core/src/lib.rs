//! Uncertainty-aware A-optimal sensor placement for an elliptic Bayesian
//! inverse problem with an irreducible secondary field, handled through the
//! Bayesian approximation error (BAE) model.

pub mod config;
pub mod error;
pub mod forward_bae;
pub mod inversion;
pub mod linear_sandbox;
pub mod mesh_fem;
pub mod numkit;
pub mod oed;
pub mod prior;
pub mod problem;
pub mod validation;

pub use error::{Error, Result};
