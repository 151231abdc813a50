//! Numerical core of a photonic quantum extreme learning machine.
//!
//! Polarization qubits are scrambled by a two-step coined quantum walk in
//! orbital angular momentum (OAM), measured projectively in the OAM basis,
//! and a trained linear readout maps outcome statistics to Pauli
//! expectation values.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the
//! experiment harness and the command line live in the `qelm` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
pub mod estimator;
pub mod linalg;
pub mod optics;
pub mod qubit;
pub mod reservoir;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
