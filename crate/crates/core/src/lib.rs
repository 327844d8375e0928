//! Coupled dynamics of extended charges and the Maxwell field (the Abraham
//! model) on a periodic spectral box, the effective Darwin comparison
//! dynamics with renormalized masses, and direct-quadrature oracles for the
//! retarded force expansions.
//!
//! Units: c = 1, Heaviside–Lorentz 1/4π Coulomb constant, and the charge
//! support radius R_φ as the default length unit.

pub mod error;
pub mod numerics;
pub mod particles;
pub mod formfactor;
pub mod kernels;

pub use error::{Error, ErrorKind, Result};
