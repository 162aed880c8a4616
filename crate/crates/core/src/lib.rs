//! Heat-trace laboratory: spectra of Schrödinger and drifting Laplacians on
//! flat tori, circles and round spheres, their heat traces and small-time
//! coefficients, Weyl-law diagnostics and isospectral comparison.

pub mod asymptotics;
pub mod error;
pub mod fields;
pub mod heattrace;
pub mod isospectral;
pub mod models;
pub mod numerics;
pub mod operators;
pub mod parametrix;
pub mod weyl;

pub use error::{Error, Result};
