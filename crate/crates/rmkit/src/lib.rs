//! Simulation, diagnostics and certificate checks for a two-species
//! prey-predator diffusion in which only the prey carries environmental
//! noise.
//!
//! The crate provides:
//!
//! - the model vector fields, the stationary prey law and the noise-free
//!   regime taxonomy ([`model`]);
//! - reproducible Brownian paths, positivity-preserving integration of the
//!   full system and of the prey-only logistic law, the explicit logistic
//!   solution, and pathwise comparison coupling ([`integrate`]);
//! - the predator invasion rate, regime classification, invasion weights,
//!   drift-condition and bracket certificates, and polynomial
//!   convergence-rate exponents ([`persistence`]);
//! - empirical occupation histograms and distributional diagnostics
//!   ([`occupation`]);
//! - the deterministic control system and the constructive three-phase
//!   steering procedure ([`control`]);
//! - the end-to-end validation suite behind `rmkit validate` ([`validate`]).

pub mod control;
pub mod error;
pub mod integrate;
pub mod model;
pub mod occupation;
pub mod persistence;
pub mod rng;
pub mod special;
pub mod validate;

pub use error::{Error, Result};
pub use model::{ModelParams, Species, State2};
