//! Numerical laboratory for Schramm-Loewner evolution in rough domains.
//!
//! The crate simulates chordal and radial SLE traces with a zipper-style
//! Loewner solver, builds numerical Riemann maps onto fractal Jordan
//! domains, runs dyadic-square sieves inside the unit disk, estimates
//! integral means spectra and measures boundary hitting statistics.

pub mod boundary_stats;
pub mod conformal;
pub mod error;
pub mod io;
pub mod loewner;
pub mod runner;
pub mod sieve;
pub mod slit;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
