//! Finite-n statistics of free fermions in a quadratic well at finite
//! temperature (the canonical MNS model): gap probabilities, m-point and
//! multi-time correlation functions via contour integrals of Fredholm
//! determinants, their limiting laws (Tracy-Widom, KPZ crossover, sine,
//! interpolating), independent brute-force oracles, and numerical
//! verification of the contour-operator determinant identities.

pub mod acceptance;
pub mod contour;
pub mod error;
pub mod fredholm;
pub mod hermite;
pub mod identities;
pub mod kernels;
pub mod multitime;
pub mod oracle;
pub mod qseries;
pub mod statistics;
pub mod specialfn;

pub use error::{FermiError, Result};
pub use qseries::ModelParams;
