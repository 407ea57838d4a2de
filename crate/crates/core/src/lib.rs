//! Numerical Finsler geometry: metrics and their tensors, geodesics,
//! Jacobi fields and focal points, Finsler submersions, Wilking
//! distributions and scenario-level equifocality checks.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dual;
pub mod error;
pub mod field;
pub mod geodesic;
pub mod jacobi;
pub mod linalg;
pub mod maps;
pub mod metric;
pub mod ode;
pub mod sampling;
pub mod scenario;
pub mod wilking;
pub mod spray;
pub mod submersion;
pub mod verifier;
pub mod zermelo;

pub use error::{Error, Result};
pub use metric::{FinslerMetric, TangentSample};
