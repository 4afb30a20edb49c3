//! Forward and inverse spectral computations for the operators
//! `y''' + (p y)' + p y'`, `y'''' - (p y')' + q y` and
//! `y^(5) + (p y'')' + (p y')'' + (q y)' + q y'` with distribution
//! coefficients, regularized through quasi-derivatives.

pub mod characteristic;
pub mod chebyshev;
pub mod error;
mod exterior;
pub mod identities;
pub mod inversion;
pub mod model;
pub mod oracle;
pub mod propagator;
pub mod rootfinder;

pub use error::{Error, Result};
pub use num_complex::Complex64;
