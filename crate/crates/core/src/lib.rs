//! Ricci flow spectral laboratory.
//!
//! Conformal-grid and closed-form Ricci flows, Laplace-Beltrami eigenpairs along
//! them, and numerical checks of the eigenvalue rate identities and the
//! variation formulas they rest on.

pub mod catalog;
pub mod cli;
pub mod config;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod monotonicity;
pub mod spectral;
pub mod varcheck;
pub mod verdict;

pub use error::{Error, Result};
