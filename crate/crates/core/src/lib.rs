//! Radial and phase-plane numerics for the Lane-Emden equation
//! `-M(D^2 u) = u^p` driven by the Pucci extremal operators `M⁺` and `M⁻`
//! in the plane.
//!
//! The crate is organized around the pipeline
//!
//! | module        | provides                                                      |
//! |---------------|---------------------------------------------------------------|
//! | [`params`]    | ellipticity data, dimension-like numbers, exponent bounds     |
//! | [`integrator`]| adaptive RK 5(4) with dense output, events, branch switching  |
//! | [`radial`]    | shooting solver for the radial ODE, solution fates            |
//! | [`phase`]     | the `(X, Z)` autonomous system, stationary points, orbits     |
//! | [`exponents`] | sweeps and bisection for the critical exponent thresholds     |
//! | [`liouville`] | rescaled profiles and the glued Liouville limit               |
//!
//! Everything is plain `f64` arithmetic over owned buffers; the crate is
//! `no_std` + `alloc` and fully deterministic (no RNG, no threads).

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod params;
pub mod curve;
pub mod integrator;
pub mod radial;
pub mod phase;
pub mod exponents;
pub mod liouville;

pub use error::Error;
pub use params::{DerivedConstants, Operator, ProblemParams};

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
