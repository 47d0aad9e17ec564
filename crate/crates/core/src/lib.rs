//! Semi-spectral solver for the Wigner equation in a Hermite velocity basis.

pub mod basis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod linalg;
pub mod observables;
pub mod operators;
pub mod output;
pub mod potential;
pub mod states;

pub use error::{Error, ErrorKind, Result};
