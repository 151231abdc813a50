//! Experiment harness, file formats and command line for the quantum-walk
//! extreme learning machine built on [`qelm_core`].

pub mod cli;
pub mod config;
mod error;
pub mod formats;
pub mod harness;
pub mod seed;

pub use error::{QelmError, Result};
