//! Planar bead-spring chains with pair interactions: equilibria, their
//! linear spectra, a symplectic integrator and brake periodic orbits
//! continued from normal modes.

pub mod equilibria;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod orbits;
pub mod potential;
pub mod spectra;
pub mod sweep;

pub use error::{Error, Result};
