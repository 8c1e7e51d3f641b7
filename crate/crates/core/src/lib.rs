//! Coherent dynamics of a Zeeman-sublevel manifold driven by RF and optical
//! fields: Rabi oscillations, light-shift isolation of a two-level system,
//! (fractional) STIRAP, and Ramsey / spin-echo dephasing of a thermal
//! ensemble in a magnetic-field gradient.

pub mod cli;
pub mod constants;
pub mod ensemble;
pub mod error;
pub mod fit;
pub mod propagator;
pub mod rotations;
pub mod spin;
pub mod stirap;
pub mod units;

pub use error::{Error, Result};
