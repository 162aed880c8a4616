//! Numerical building blocks shared by the spectral modules.

pub mod chebyshev;
pub mod eigen;
pub mod lsq;
pub mod quadrature;
pub mod special;
pub mod sum;

pub use sum::{neumaier_sum, Neumaier};
