//! Numerical laboratory for magnetic flows on closed surfaces.
//!
//! Fibrewise Fourier analysis on the unit tangent bundle, energy identities
//! for the magnetic generator, closed orbits and Riccati solutions on the
//! Bolza surface, magnetic ray transforms and entropy production of
//! thermostat perturbations.

pub mod cli;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod fiber;
pub mod geometry;
pub mod pestov;
pub mod quadrature;
pub mod report;
pub mod tomography;

pub use error::{Error, Result};
