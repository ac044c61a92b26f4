//! Simulation, training and fabrication realization of
//! polarization-multiplexed metasurface diffractive neural networks.
//!
//! Light is propagated between layers with the first Rayleigh-Sommerfeld
//! impulse response; each metasurface layer applies a diagonal Jones
//! transmission, so x- and y-polarized light see independent networks.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod field;
pub mod metasurface;
pub mod model;
pub mod par;
pub mod propagation;
pub mod trainer;

pub use error::{Error, Result};
