//! Regular approximations of the spectrum of a singular discrete linear
//! Hamiltonian system on a half-line.
//!
//! The pipeline is: describe the coefficients ([`model`]), propagate
//! solutions ([`solution`]), classify the endpoint at +∞ ([`classify`]),
//! pick a self-adjoint extension and induce boundary conditions on truncated
//! intervals ([`extension`]), then compute resolvents, eigenvalues, defects
//! and error bounds on those intervals ([`spectral`]).  [`config`] and
//! [`report`] turn a JSON run description into CSV/JSON/SVG output.

pub mod classify;
pub mod config;
pub mod error;
pub mod extension;
pub mod matrix;
pub mod model;
pub mod report;
pub mod solution;
pub mod spectral;

pub use error::{Error, Result};
pub use matrix::{CMat, C64};
